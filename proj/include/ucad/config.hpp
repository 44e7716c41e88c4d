#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>

#include "ucad/errors.hpp"

namespace ucad {

enum class Strategy { BaseRect, Cad, CadUgs, Full };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "base-rect") return Strategy::BaseRect;
  if (s == "cad") return Strategy::Cad;
  if (s == "cad+ugs") return Strategy::CadUgs;
  if (s == "full") return Strategy::Full;
  throw config_error("strategy: must be one of base-rect, cad, cad+ugs, full");
}

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::BaseRect: return "base-rect";
    case Strategy::Cad: return "cad";
    case Strategy::CadUgs: return "cad+ugs";
    case Strategy::Full: return "full";
  }
  return "?";
}

struct RunConfig {
  // displacement
  int k_target = 0;            // 0 = auto (H*W/655)
  double compactness = 10.0;
  int slic_iterations = 10;
  double temperature = 0.5;    // T
  int n_regions = -1;          // -1 = auto (ceil(K/4))
  // losses
  double w_l = 1.0;
  double w_u = 0.5;
  double lambda = 0.2;
  double beta_max = 2.0;
  double beta_min = 1.0;
  // optimizer / teacher
  double alpha = 0.99;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // schedule
  int warmup_steps = 200;
  int total_steps = 2000;
  int eval_every = 100;
  int batch = 1;
  int hidden = 16;
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::Full;

  void validate() const {
    if (k_target < 0) throw config_error("k_target: must be >= 0 (0 = auto)");
    if (!(compactness > 0.0)) throw config_error("compactness: must be > 0");
    if (slic_iterations < 1) throw config_error("slic_iterations: must be >= 1");
    if (!(temperature > 0.0)) throw config_error("temperature: must be > 0");
    if (w_l < 0.0) throw config_error("w_l: must be >= 0");
    if (w_u < 0.0) throw config_error("w_u: must be >= 0");
    if (lambda < 0.0) throw config_error("lambda: must be >= 0");
    if (beta_max < 0.0) throw config_error("beta_max: must be >= 0");
    if (beta_min < 0.0) throw config_error("beta_min: must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw config_error("alpha: must be in [0,1]");
    if (!(lr > 0.0)) throw config_error("lr: must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw config_error("momentum: must be in [0,1)");
    if (weight_decay < 0.0) throw config_error("weight_decay: must be >= 0");
    if (warmup_steps < 0) throw config_error("warmup_steps: must be >= 0");
    if (total_steps < 1) throw config_error("total_steps: must be >= 1");
    if (warmup_steps > total_steps) throw config_error("warmup_steps: must be <= total_steps");
    if (eval_every < 1) throw config_error("eval_every: must be >= 1");
    if (batch < 1) throw config_error("batch: must be >= 1");
    if (hidden < 1) throw config_error("hidden: must be >= 1");
  }
};

// Plain key=value file; unknown keys rejected. Flags override file values.
inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: missing '=' at " + path + ":" + std::to_string(lineno));
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "k_target") cfg.k_target = std::stoi(val);
      else if (key == "compactness") cfg.compactness = std::stod(val);
      else if (key == "slic_iterations") cfg.slic_iterations = std::stoi(val);
      else if (key == "temperature") cfg.temperature = std::stod(val);
      else if (key == "n_regions") cfg.n_regions = std::stoi(val);
      else if (key == "w_l") cfg.w_l = std::stod(val);
      else if (key == "w_u") cfg.w_u = std::stod(val);
      else if (key == "lambda") cfg.lambda = std::stod(val);
      else if (key == "beta_max") cfg.beta_max = std::stod(val);
      else if (key == "beta_min") cfg.beta_min = std::stod(val);
      else if (key == "alpha") cfg.alpha = std::stod(val);
      else if (key == "lr") cfg.lr = std::stod(val);
      else if (key == "momentum") cfg.momentum = std::stod(val);
      else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
      else if (key == "warmup_steps") cfg.warmup_steps = std::stoi(val);
      else if (key == "total_steps") cfg.total_steps = std::stoi(val);
      else if (key == "eval_every") cfg.eval_every = std::stoi(val);
      else if (key == "batch") cfg.batch = std::stoi(val);
      else if (key == "hidden") cfg.hidden = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "strategy") cfg.strategy = parse_strategy(val);
      else throw config_error("config: unknown key '" + key + "' in " + path);
    } catch (const config_error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error("config: bad value for '" + key + "' in " + path);
    }
  }
}

// Canonical dump; re-readable by apply_config_file.
inline void print_config(const RunConfig& cfg, std::ostream& os) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  os << "k_target=" << cfg.k_target << '\n'
     << "compactness=" << num(cfg.compactness) << '\n'
     << "slic_iterations=" << cfg.slic_iterations << '\n'
     << "temperature=" << num(cfg.temperature) << '\n'
     << "n_regions=" << cfg.n_regions << '\n'
     << "w_l=" << num(cfg.w_l) << '\n'
     << "w_u=" << num(cfg.w_u) << '\n'
     << "lambda=" << num(cfg.lambda) << '\n'
     << "beta_max=" << num(cfg.beta_max) << '\n'
     << "beta_min=" << num(cfg.beta_min) << '\n'
     << "alpha=" << num(cfg.alpha) << '\n'
     << "lr=" << num(cfg.lr) << '\n'
     << "momentum=" << num(cfg.momentum) << '\n'
     << "weight_decay=" << num(cfg.weight_decay) << '\n'
     << "warmup_steps=" << cfg.warmup_steps << '\n'
     << "total_steps=" << cfg.total_steps << '\n'
     << "eval_every=" << cfg.eval_every << '\n'
     << "batch=" << cfg.batch << '\n'
     << "hidden=" << cfg.hidden << '\n'
     << "seed=" << cfg.seed << '\n'
     << "strategy=" << strategy_name(cfg.strategy) << '\n';
}

}  // namespace ucad
