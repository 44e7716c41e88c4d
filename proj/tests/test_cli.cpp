#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string cli() {
  const char* p = std::getenv("UCAD_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args) {
  std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string capture(const std::string& args) {
  std::string out_path = "cli_capture.txt";
  std::string cmd = cli() + " " + args + " >" + out_path + " 2>/dev/null";
  std::system(cmd.c_str());
  std::ifstream is(out_path);
  std::stringstream ss;
  ss << is.rdbuf();
  is.close();
  fs::remove(out_path);
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const std::string kGenArgs =
    "gen-data --labeled 1 --unlabeled 2 --val 1 --size 32 "
    "--radius-min 4 --radius-max 8 --seed 5";
const std::string kTrainArgs =
    "train --steps 30 --warmup_steps 10 --eval_every 10 --k_target 16 "
    "--n_regions 4 --hidden 4 --seed 3";

}  // namespace

TEST_CASE("print-config emits a full re-readable dump") {
  std::string out = capture("print-config");
  REQUIRE(out.find("lambda=0.2\n") != std::string::npos);
  REQUIRE(out.find("lr=0.01\n") != std::string::npos);
  REQUIRE(out.find("momentum=0.9\n") != std::string::npos);
  REQUIRE(out.find("weight_decay=0.0001\n") != std::string::npos);
  REQUIRE(out.find("strategy=full\n") != std::string::npos);
  std::string overridden = capture("print-config --strategy cad --lambda 0.5");
  REQUIRE(overridden.find("lambda=0.5\n") != std::string::npos);
  REQUIRE(overridden.find("strategy=cad\n") != std::string::npos);
}

TEST_CASE("config file applies with flag override") {
  std::ofstream("cli_cfg.txt") << "lambda=0.7\ntemperature=0.25\n";
  std::string out = capture("print-config --config cli_cfg.txt --lambda 0.9");
  REQUIRE(out.find("lambda=0.9\n") != std::string::npos);    // flag wins
  REQUIRE(out.find("temperature=0.25\n") != std::string::npos);
  fs::remove("cli_cfg.txt");
}

TEST_CASE("gen-data writes the documented layout deterministically") {
  fs::remove_all("cli_data_a");
  fs::remove_all("cli_data_b");
  REQUIRE(run(kGenArgs + " --out cli_data_a") == 0);
  REQUIRE(run(kGenArgs + " --out cli_data_b") == 0);
  for (const char* f : {"manifest.txt", "labeled/img_0000.pgm", "labeled/lab_0000.pgm",
                        "unlabeled/img_0001.pgm", "val/img_0000.pgm", "val/lab_0000.pgm"}) {
    REQUIRE(fs::exists(fs::path("cli_data_a") / f));
    REQUIRE(slurp(fs::path("cli_data_a") / f) == slurp(fs::path("cli_data_b") / f));
  }
  fs::remove_all("cli_data_b");
}

TEST_CASE("train and eval round trip with byte-identical reruns") {
  REQUIRE(fs::exists("cli_data_a/manifest.txt"));
  fs::remove_all("cli_run_a");
  fs::remove_all("cli_run_b");
  REQUIRE(run(kTrainArgs + " --data cli_data_a --out cli_run_a") == 0);
  REQUIRE(run(kTrainArgs + " --data cli_data_a --out cli_run_b") == 0);
  for (const char* f : {"student.ckpt", "teacher.ckpt", "history.csv"}) {
    REQUIRE(fs::exists(fs::path("cli_run_a") / f));
    REQUIRE(slurp(fs::path("cli_run_a") / f) == slurp(fs::path("cli_run_b") / f));
  }
  fs::remove_all("cli_run_b");

  REQUIRE(run("eval --data cli_data_a --checkpoint cli_run_a/student.ckpt "
              "--split val --out cli_metrics.csv --overlays cli_overlays") == 0);
  std::string metrics = slurp("cli_metrics.csv");
  REQUIRE(metrics.rfind("class,dsc,asd,defined\n", 0) == 0);
  REQUIRE(fs::exists("cli_overlays/overlay_0000.pgm"));
  fs::remove("cli_metrics.csv");
  fs::remove_all("cli_overlays");
  fs::remove_all("cli_run_a");
}

TEST_CASE("ablate writes per-cell rows plus medians") {
  REQUIRE(fs::exists("cli_data_a/manifest.txt"));
  REQUIRE(run("ablate --data cli_data_a --out cli_ablation.csv --seeds 1 "
              "--steps 20 --warmup_steps 5 --eval_every 10 --k_target 16 "
              "--n_regions 4 --hidden 4") == 0);
  std::string csv = slurp("cli_ablation.csv");
  REQUIRE(csv.rfind("strategy,seed,dsc,asd\n", 0) == 0);
  for (const char* s : {"base-rect,1,", "cad,1,", "cad+ugs,1,", "full,1,",
                        "base-rect,median,", "full,median,"})
    REQUIRE(csv.find(s) != std::string::npos);
  fs::remove("cli_ablation.csv");
  fs::remove_all("cli_data_a");
}

TEST_CASE("exit codes distinguish config and data errors") {
  REQUIRE(run("train --strategy bogus") == 2);
  REQUIRE(run("gen-data --labeled 0 --out cli_should_not_exist") == 2);
  REQUIRE(run("train --data cli_no_such_dataset") == 3);
  REQUIRE(run("eval --checkpoint cli_no_such.ckpt --data cli_no_such_dataset") == 3);
  REQUIRE(run("definitely-not-a-subcommand") == 2);
  REQUIRE_FALSE(fs::exists("cli_should_not_exist"));
}
