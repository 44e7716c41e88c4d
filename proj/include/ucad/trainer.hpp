#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ucad/config.hpp"
#include "ucad/data_synth.hpp"
#include "ucad/displacement.hpp"
#include "ucad/grid.hpp"
#include "ucad/losses.hpp"
#include "ucad/metrics.hpp"
#include "ucad/model.hpp"
#include "ucad/rng.hpp"

namespace ucad {

struct TrainRecord {
  int step = 0;
  double l_seg = 0.0;
  double l_unc = 0.0;
  double l_total = 0.0;
  double beta = 0.0;
  double val_dsc = 0.0;
  bool has_val = false;
};

struct TrainHistory {
  std::vector<TrainRecord> records;

  void write_csv(std::ostream& os) const {
    os << "step,l_seg,l_unc,l_total,beta,val_dsc\n";
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      return std::string(buf);
    };
    for (const TrainRecord& r : records) {
      os << r.step << ',' << num(r.l_seg) << ',' << num(r.l_unc) << ',' << num(r.l_total)
         << ',' << num(r.beta) << ',';
      if (r.has_val) os << num(r.val_dsc);
      os << '\n';
    }
  }
};

struct TrainResult {
  ModelParams student;
  ModelParams teacher;
  TrainHistory history;
};

// Rectangular-displacement baseline: n axis-aligned rectangles with total
// expected area matching the superpixel variant's masked-area fraction.
// Aspect ratio log-uniform in [0.5, 2], position uniform.
inline Mask make_rect_mask(int h, int w, int n, double area_frac, RngStream& rng) {
  Mask m(h, w);
  if (n < 1) return m;
  double per_rect = area_frac * h * w / n;
  for (int i = 0; i < n; ++i) {
    double aspect = std::exp(std::log(0.5) + rng.next_double() * (std::log(2.0) - std::log(0.5)));
    int rw = std::clamp(static_cast<int>(std::lround(std::sqrt(per_rect * aspect))), 1, w);
    int rh = std::clamp(static_cast<int>(std::lround(std::sqrt(per_rect / aspect))), 1, h);
    int top = rng.next_int(h - rh + 1);
    int left = rng.next_int(w - rw + 1);
    for (int r = top; r < top + rh; ++r)
      for (int c = left; c < left + rw; ++c) m.at(r, c) = 1;
  }
  return m;
}

namespace detail {

inline void add_scaled(ModelGrads& acc, const ModelGrads& g, double scale) {
  auto at = acc.tensors();
  auto gt = g.tensors();
  for (int t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < at[t]->size(); ++i) (*at[t])[i] += scale * (*gt[t])[i];
}

struct StepMix {
  MixedSample sample;
  Mask labeled_mask;  // 1 where pixels come from the labeled image
};

// One displacement direction under the configured strategy.
inline StepMix make_mix(const RunConfig& cfg, const Grid2D& x_src, const LabelMap& y_src,
                        const Grid2D& x_dst, const LabelMap& y_dst, const ProbMap& p_src,
                        RngStream& rng, MixDirection dir) {
  StepMix out;
  if (cfg.strategy == Strategy::BaseRect) {
    int k_eq = cfg.k_target > 0 ? cfg.k_target : auto_k_target(x_src.height, x_src.width);
    int n = cfg.n_regions >= 0 ? cfg.n_regions : (k_eq + 3) / 4;
    double frac = static_cast<double>(n) / k_eq;
    Mask m = make_rect_mask(x_src.height, x_src.width, n, frac, rng);
    out.sample.image = mix_images(x_src, x_dst, m);
    out.sample.label = mix_labels(y_src, y_dst, m);
    out.sample.mask = std::move(m);
    out.sample.direction = dir;
  } else {
    DisplaceConfig dc;
    dc.k_target = cfg.k_target;
    dc.compactness = cfg.compactness;
    dc.slic_iterations = cfg.slic_iterations;
    dc.temperature = cfg.temperature;
    dc.n_regions = cfg.n_regions;
    dc.uncertainty_guided = cfg.strategy != Strategy::Cad;
    out.sample = displace_pair(x_src, y_src, x_dst, y_dst, p_src, dc, rng, dir);
  }
  out.labeled_mask = dir == MixDirection::LabeledIntoUnlabeled ? out.sample.mask
                                                               : out.sample.mask.complement();
  return out;
}

}  // namespace detail

// Full training loop: labeled-only warm-up, then bidirectional displacement
// with seg + uncertainty-weighted consistency losses, SGD student updates and
// EMA teacher updates.
inline TrainResult train(const RunConfig& cfg, const Dataset& data, const RngStream& master) {
  cfg.validate();
  if (data.labeled.empty()) throw config_error("train: labeled split is empty");
  if (data.unlabeled.size() == 0) throw config_error("train: unlabeled split is empty");
  const int C = data.labeled[0].second.num_classes;

  RngStream init_rng = master.fork(0);
  RngStream data_rng = master.fork(1);

  TrainResult res;
  res.student = random_init(cfg.hidden, C, init_rng);
  res.teacher = res.student;
  OptimState opt(cfg.hidden, C, cfg.lr, cfg.momentum, cfg.weight_decay);
  LossWeights lw{cfg.w_l, cfg.w_u, cfg.lambda, cfg.beta_max, cfg.beta_min};
  const double lambda_eff = cfg.strategy == Strategy::Full ? cfg.lambda : 0.0;

  for (int step = 1; step <= cfg.total_steps; ++step) {
    double beta = beta_schedule(step, cfg.total_steps, lw);
    TrainRecord rec;
    rec.step = step;
    rec.beta = beta;
    ModelGrads grads(cfg.hidden, C);

    if (step <= cfg.warmup_steps) {
      Mask full;
      double lsum = 0.0;
      for (int b = 0; b < cfg.batch; ++b) {
        int li = data_rng.next_int(static_cast<int>(data.labeled.size()));
        const auto& [img, gt] = data.labeled[li];
        if (full.bits.empty()) full = Mask(img.height, img.width, 1);
        auto [logits, pred] = forward(res.student, img);
        LossValue loss = dice_ce_masked(pred, gt, full);
        if (!std::isfinite(loss.value))
          throw numeric_error("train: non-finite warm-up loss at step " + std::to_string(step));
        detail::add_scaled(grads, backward(res.student, img, loss.grad), 1.0 / cfg.batch);
        lsum += loss.value;
      }
      sgd_step(res.student, grads, opt);
      rec.l_seg = lsum / cfg.batch;
      rec.l_total = rec.l_seg;
      if (step == cfg.warmup_steps) res.teacher = res.student;
    } else {
      double seg_sum = 0.0, unc_sum = 0.0, tot_sum = 0.0;
      const int dirs = 2;
      for (int b = 0; b < cfg.batch; ++b) {
        int li = data_rng.next_int(static_cast<int>(data.labeled.size()));
        int ui = data_rng.next_int(static_cast<int>(data.unlabeled.size()));
        const auto& [x_l, y_l] = data.labeled[li];
        const Grid2D& x_u = data.unlabeled.image(ui);
        auto [tl_logits, p_t_l] = forward(res.teacher, x_l);
        auto [tu_logits, p_t_u] = forward(res.teacher, x_u);
        LabelMap y_p = argmax_labels(p_t_u);

        for (int d = 0; d < dirs; ++d) {
          RngStream mix_rng = master.fork(1000 + (static_cast<std::uint64_t>(step) * cfg.batch + b) * 2 + d);
          detail::StepMix mix =
              d == 0 ? detail::make_mix(cfg, x_u, y_p, x_l, y_l, p_t_u, mix_rng,
                                        MixDirection::UnlabeledIntoLabeled)
                     : detail::make_mix(cfg, x_l, y_l, x_u, y_p, p_t_l, mix_rng,
                                        MixDirection::LabeledIntoUnlabeled);

          auto [s_logits, s_pred] = forward(res.student, mix.sample.image);
          LossValue lseg = seg_loss(s_pred, y_l, y_p, mix.labeled_mask, lw);
          auto [t_logits, p_t_mix] = forward(res.teacher, mix.sample.image);
          LossValue lunc = unc_loss(s_pred, p_t_mix, mix.labeled_mask.complement(), beta);
          LossValue ltot = total_loss(lseg, lunc, lambda_eff);
          if (!std::isfinite(ltot.value))
            throw numeric_error("train: non-finite loss at step " + std::to_string(step));
          detail::add_scaled(grads, backward(res.student, mix.sample.image, ltot.grad),
                             1.0 / (cfg.batch * dirs));
          seg_sum += lseg.value;
          unc_sum += lunc.value;
          tot_sum += ltot.value;
        }
      }
      sgd_step(res.student, grads, opt);
      res.teacher = ema_update(res.teacher, res.student, cfg.alpha);
      rec.l_seg = seg_sum / (cfg.batch * dirs);
      rec.l_unc = unc_sum / (cfg.batch * dirs);
      rec.l_total = tot_sum / (cfg.batch * dirs);
    }

    if (!data.validation.empty() &&
        (step % cfg.eval_every == 0 || step == cfg.total_steps)) {
      rec.val_dsc = evaluate(res.student, data.validation).mean_fg_dsc;
      rec.has_val = true;
    }
    res.history.records.push_back(rec);
  }
  return res;
}

}  // namespace ucad
