#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ucad/config.hpp"
#include "ucad/data_synth.hpp"
#include "ucad/metrics.hpp"
#include "ucad/pgm.hpp"
#include "ucad/trainer.hpp"

namespace {

using namespace ucad;

// Config file applies first, command-line flags override.
void preload_config(RunConfig& cfg, int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") apply_config_file(cfg, argv[i + 1]);
}

void add_run_flags(CLI::App* cmd, RunConfig& cfg, std::string& strategy_str,
                   std::string& config_path) {
  cmd->add_option("--config", config_path, "key=value config file (flags override)");
  cmd->add_option("--k_target", cfg.k_target, "superpixel count target (0 = auto H*W/655)");
  cmd->add_option("--compactness", cfg.compactness, "SLIC compactness");
  cmd->add_option("--slic_iterations", cfg.slic_iterations, "SLIC iterations");
  cmd->add_option("--temperature", cfg.temperature, "region sampling temperature T");
  cmd->add_option("--n_regions", cfg.n_regions, "regions displaced per direction (-1 = ceil(K/4))");
  cmd->add_option("--w_l", cfg.w_l, "labeled-region loss weight");
  cmd->add_option("--w_u", cfg.w_u, "unlabeled-region loss weight");
  cmd->add_option("--lambda", cfg.lambda, "consistency loss weight");
  cmd->add_option("--beta_max", cfg.beta_max, "beta anneal start");
  cmd->add_option("--beta_min", cfg.beta_min, "beta anneal end");
  cmd->add_option("--alpha", cfg.alpha, "teacher EMA decay");
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--momentum", cfg.momentum, "SGD momentum");
  cmd->add_option("--weight_decay", cfg.weight_decay, "weight decay");
  cmd->add_option("--warmup_steps", cfg.warmup_steps, "labeled-only warm-up steps");
  cmd->add_option("--total_steps,--steps", cfg.total_steps, "total training steps");
  cmd->add_option("--eval_every", cfg.eval_every, "validation interval");
  cmd->add_option("--batch", cfg.batch, "pairs per step");
  cmd->add_option("--hidden", cfg.hidden, "hidden units");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--strategy", strategy_str, "base-rect | cad | cad+ugs | full");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_overlays(const std::string& dir, const ModelParams& model,
                    const std::vector<std::pair<Grid2D, LabelMap>>& split) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& [img, gt] = split[i];
    auto [logits, probs] = forward(model, img);
    LabelMap pred = argmax_labels(probs);
    double denom = std::max(1, gt.num_classes - 1);
    Grid2D trip(img.height, img.width * 3);
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c) {
        trip.at(r, c) = img.at(r, c);
        trip.at(r, c + img.width) = pred.at(r, c) / denom;
        trip.at(r, c + 2 * img.width) = gt.at(r, c) / denom;
      }
    char buf[32];
    std::snprintf(buf, sizeof buf, "overlay_%04d.pgm", static_cast<int>(i));
    save_grid(dir + "/" + buf, trip);
  }
}

struct EvalCell {
  double dsc = 0.0;
  double asd = 0.0;
};

EvalCell run_cell(RunConfig cfg, const Dataset& ds) {
  TrainResult res = train(cfg, ds, RngStream(cfg.seed));
  MetricsReport rep = evaluate(res.student, ds.validation);
  return {rep.mean_fg_dsc, rep.mean_fg_asd_defined ? rep.mean_fg_asd
                                                   : std::numeric_limits<double>::quiet_NaN()};
}

int run(int argc, char** argv) {
  CLI::App app{"uncertainty-guided contour-aware displacement trainer"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  DatasetSpec dspec;
  std::string gen_out = "data";
  int gen_size = 64;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--labeled", dspec.n_labeled, "labeled sample count");
  gen->add_option("--unlabeled", dspec.n_unlabeled, "unlabeled sample count");
  gen->add_option("--val", dspec.n_val, "validation sample count");
  gen->add_option("--size", gen_size, "image side length");
  gen->add_option("--classes", dspec.num_classes, "class count (including background)");
  gen->add_option("--seed", dspec.seed, "dataset seed");
  gen->add_option("--blobs-min", dspec.blobs_min, "min blobs per image");
  gen->add_option("--blobs-max", dspec.blobs_max, "max blobs per image");
  gen->add_option("--radius-min", dspec.radius_min, "min blob radius");
  gen->add_option("--radius-max", dspec.radius_max, "max blob radius");
  gen->add_option("--waviness", dspec.waviness, "boundary waviness amplitude (px)");
  gen->add_option("--noise", dspec.noise_std, "pixel noise std");

  // train
  auto* tr = app.add_subcommand("train", "train student/teacher on a dataset");
  RunConfig cfg;
  preload_config(cfg, argc, argv);
  std::string strategy_str = strategy_name(cfg.strategy);
  std::string config_path, train_data = "data", train_out = ".";
  tr->add_option("--data", train_data, "dataset directory");
  tr->add_option("--out", train_out, "output directory");
  add_run_flags(tr, cfg, strategy_str, config_path);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string eval_data = "data", eval_ckpt = "student.ckpt", eval_split = "val";
  std::string eval_out = "metrics.csv", overlays_dir;
  ev->add_option("--data", eval_data, "dataset directory");
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  ev->add_option("--split", eval_split, "labeled | unlabeled | val");
  ev->add_option("--out", eval_out, "metrics CSV path");
  ev->add_option("--overlays", overlays_dir, "write per-image overlay triptychs here");

  // ablate
  auto* ab = app.add_subcommand("ablate", "strategy x seed ablation grid");
  RunConfig abcfg;
  preload_config(abcfg, argc, argv);
  std::string ab_strategy_unused = strategy_name(abcfg.strategy), ab_config;
  std::string ab_data = "data", ab_out = "ablation.csv";
  int ab_seeds = 5;
  ab->add_option("--data", ab_data, "dataset directory");
  ab->add_option("--out", ab_out, "ablation CSV path");
  ab->add_option("--seeds", ab_seeds, "number of seeds (1..n)");
  add_run_flags(ab, abcfg, ab_strategy_unused, ab_config);

  // print-config
  auto* pc = app.add_subcommand("print-config", "dump the effective configuration");
  RunConfig pccfg;
  preload_config(pccfg, argc, argv);
  std::string pc_strategy = strategy_name(pccfg.strategy), pc_config;
  add_run_flags(pc, pccfg, pc_strategy, pc_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    if (dspec.n_labeled < 1) throw config_error("--labeled: must be >= 1");
    dspec.height = dspec.width = gen_size;
    dspec.class_mean = default_class_means(dspec.num_classes);
    dspec.validate();
    Dataset ds = generate_dataset(dspec);
    save_dataset(gen_out, ds, dspec);
    std::ifstream mf(gen_out + "/manifest.txt");
    std::cout << mf.rdbuf();
    return 0;
  }

  if (tr->parsed()) {
    cfg.strategy = parse_strategy(strategy_str);
    cfg.validate();
    Dataset ds = load_dataset(train_data);
    TrainResult res = train(cfg, ds, RngStream(cfg.seed));
    std::filesystem::create_directories(train_out);
    save_checkpoint(train_out + "/student.ckpt", res.student);
    save_checkpoint(train_out + "/teacher.ckpt", res.teacher);
    std::ofstream hs(train_out + "/history.csv");
    if (!hs) throw data_error("train: cannot write history.csv");
    res.history.write_csv(hs);
    std::cout << "trained " << cfg.total_steps << " steps, strategy "
              << strategy_name(cfg.strategy) << "\n";
    return 0;
  }

  if (ev->parsed()) {
    ModelParams model = load_checkpoint(eval_ckpt);
    Dataset ds = load_dataset(eval_data);
    std::vector<std::pair<Grid2D, LabelMap>> split;
    if (eval_split == "labeled") split = ds.labeled;
    else if (eval_split == "val") split = ds.validation;
    else if (eval_split == "unlabeled") {
      for (std::size_t i = 0; i < ds.unlabeled.size(); ++i)
        split.emplace_back(ds.unlabeled.image(i), ds.unlabeled.eval_only_ground_truth(i));
    } else throw config_error("--split: must be labeled, unlabeled, or val");
    if (split.empty()) throw data_error("eval: split '" + eval_split + "' is empty");
    MetricsReport rep = evaluate(model, split);
    std::ofstream os(eval_out);
    if (!os) throw data_error("eval: cannot write " + eval_out);
    write_metrics_csv(rep, os);
    if (!overlays_dir.empty()) write_overlays(overlays_dir, model, split);
    std::cout << "mean_fg_dsc=" << fmt(rep.mean_fg_dsc) << "\n";
    return 0;
  }

  if (ab->parsed()) {
    if (ab_seeds < 1) throw config_error("--seeds: must be >= 1");
    abcfg.validate();
    Dataset ds = load_dataset(ab_data);
    const Strategy order[4] = {Strategy::BaseRect, Strategy::Cad, Strategy::CadUgs,
                               Strategy::Full};
    std::ofstream os(ab_out);
    if (!os) throw data_error("ablate: cannot write " + ab_out);
    os << "strategy,seed,dsc,asd\n";
    std::vector<std::string> summary;
    for (Strategy st : order) {
      std::vector<double> dscs, asds;
      for (int s = 1; s <= ab_seeds; ++s) {
        RunConfig cell = abcfg;
        cell.strategy = st;
        cell.seed = static_cast<std::uint64_t>(s);
        EvalCell r = run_cell(cell, ds);
        os << strategy_name(st) << ',' << s << ',' << fmt(r.dsc) << ',' << fmt(r.asd) << '\n';
        dscs.push_back(r.dsc);
        asds.push_back(r.asd);
      }
      summary.push_back(std::string(strategy_name(st)) + ",median," + fmt(median(dscs)) + ',' +
                        fmt(median(asds)));
    }
    for (const std::string& line : summary) os << line << '\n';
    std::cout << "wrote " << ab_out << "\n";
    return 0;
  }

  if (pc->parsed()) {
    pccfg.strategy = parse_strategy(pc_strategy);
    pccfg.validate();
    print_config(pccfg, std::cout);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ucad::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ucad::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ucad::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
