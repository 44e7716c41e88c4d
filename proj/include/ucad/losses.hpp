#pragma once

#include <cmath>
#include <vector>

#include "ucad/displacement.hpp"
#include "ucad/grid.hpp"

namespace ucad {

// Loss scalar plus its gradient w.r.t. the student logits.
struct LossValue {
  double value = 0.0;
  Logits grad;
};

struct LossWeights {
  double w_l = 1.0;
  double w_u = 0.5;
  double lambda = 0.2;
  double beta_max = 1.0;
  double beta_min = 0.1;
};

constexpr double kDiceEps = 1e-5;
constexpr double kProbClamp = 1e-12;

namespace detail {

// Pull a probability-space gradient back through the per-pixel softmax:
// g_z(c) = p_c * (g_p(c) - sum_k g_p(k) p_k).
inline void softmax_pullback(const ProbMap& p, const std::vector<double>& grad_p, Logits& grad_z) {
  const int C = p.num_classes;
  for (std::size_t px = 0; px < p.pixel_count(); ++px) {
    const double* pp = &p.v[px * C];
    const double* gp = &grad_p[px * C];
    double dot = 0.0;
    for (int k = 0; k < C; ++k) dot += gp[k] * pp[k];
    double* gz = &grad_z.v[px * C];
    for (int k = 0; k < C; ++k) gz[k] += pp[k] * (gp[k] - dot);
  }
}

inline double entropy_grad_coeff(double p) {
  return -(std::log(std::max(p, kProbClamp)) + 1.0);
}

}  // namespace detail

// 0.5 * soft Dice + 0.5 * CE over mask pixels only. Empty mask -> 0, zero grad.
inline LossValue dice_ce_masked(const ProbMap& pred, const LabelMap& target, const Mask& m) {
  if (pred.height != target.height || pred.width != target.width ||
      pred.num_classes != target.num_classes || pred.height != m.height ||
      pred.width != m.width)
    throw data_error("dice_ce_masked: shape mismatch");

  LossValue out;
  out.grad = Logits(pred.height, pred.width, pred.num_classes, 0.0);
  const int C = pred.num_classes;
  const std::size_t npx = pred.pixel_count();
  std::size_t nm = m.count_set();
  if (nm == 0) return out;

  std::vector<double> grad_p(pred.v.size(), 0.0);

  // Cross-entropy term.
  double ce = 0.0;
  for (std::size_t px = 0; px < npx; ++px) {
    if (!m.bits[px]) continue;
    int t = target.labels[px];
    double p = std::max(pred.v[px * C + t], kProbClamp);
    ce -= std::log(p);
    grad_p[px * C + t] -= 0.5 / (static_cast<double>(nm) * p);
  }
  ce /= static_cast<double>(nm);

  // Soft Dice term, per class over mask pixels.
  double dice = 0.0;
  std::vector<double> inter(C, 0.0), psum(C, 0.0), ysum(C, 0.0);
  for (std::size_t px = 0; px < npx; ++px) {
    if (!m.bits[px]) continue;
    int t = target.labels[px];
    ysum[t] += 1.0;
    for (int k = 0; k < C; ++k) {
      double p = pred.v[px * C + k];
      psum[k] += p;
      if (k == t) inter[k] += p;
    }
  }
  std::vector<double> num(C), den(C);
  for (int k = 0; k < C; ++k) {
    num[k] = 2.0 * inter[k] + kDiceEps;
    den[k] = psum[k] + ysum[k] + kDiceEps;
    dice += 1.0 - num[k] / den[k];
  }
  dice /= C;
  for (std::size_t px = 0; px < npx; ++px) {
    if (!m.bits[px]) continue;
    int t = target.labels[px];
    for (int k = 0; k < C; ++k) {
      double y = (k == t) ? 1.0 : 0.0;
      double d = -(2.0 * y * den[k] - num[k]) / (den[k] * den[k]);
      grad_p[px * C + k] += 0.5 * d / C;
    }
  }

  out.value = 0.5 * dice + 0.5 * ce;
  detail::softmax_pullback(pred, grad_p, out.grad);
  return out;
}

// L_seg = w_l * DiceCE(pred, y_l; M) + w_u * DiceCE(pred, y_p; 1-M)
inline LossValue seg_loss(const ProbMap& pred, const LabelMap& y_l, const LabelMap& y_p,
                          const Mask& m, const LossWeights& w) {
  LossValue a = dice_ce_masked(pred, y_l, m);
  LossValue b = dice_ce_masked(pred, y_p, m.complement());
  LossValue out;
  out.value = w.w_l * a.value + w.w_u * b.value;
  out.grad = Logits(pred.height, pred.width, pred.num_classes, 0.0);
  for (std::size_t i = 0; i < out.grad.v.size(); ++i)
    out.grad.v[i] = w.w_l * a.grad.v[i] + w.w_u * b.grad.v[i];
  return out;
}

// Dynamic uncertainty-weighted consistency loss over the unlabeled-provenance
// region. Teacher is detached: gradient flows through p_s only.
inline LossValue unc_loss(const ProbMap& p_s, const ProbMap& p_t, const Mask& region, double beta) {
  if (p_s.height != p_t.height || p_s.width != p_t.width ||
      p_s.num_classes != p_t.num_classes || p_s.height != region.height ||
      p_s.width != region.width)
    throw data_error("unc_loss: shape mismatch");

  LossValue out;
  out.grad = Logits(p_s.height, p_s.width, p_s.num_classes, 0.0);
  const std::size_t nu = region.count_set();
  if (nu == 0) return out;

  const int C = p_s.num_classes;
  std::vector<double> grad_p(p_s.v.size(), 0.0);
  double acc = 0.0;
  for (std::size_t px = 0; px < p_s.pixel_count(); ++px) {
    if (!region.bits[px]) continue;
    const double* ps = &p_s.v[px * C];
    const double* pt = &p_t.v[px * C];
    double hs = 0.0, ht = 0.0, num = 0.0;
    for (int k = 0; k < C; ++k) {
      if (ps[k] > 0.0) hs -= ps[k] * std::log(ps[k]);
      if (pt[k] > 0.0) ht -= pt[k] * std::log(pt[k]);
      double d = ps[k] - pt[k];
      num += d * d;
    }
    double es = std::exp(beta * hs);
    double den = es + std::exp(beta * ht);
    acc += num / den + beta * (hs + ht);
    double* gp = &grad_p[px * C];
    for (int k = 0; k < C; ++k) {
      double dh = detail::entropy_grad_coeff(ps[k]);
      gp[k] += (2.0 * (ps[k] - pt[k]) / den - num / (den * den) * beta * es * dh + beta * dh) /
               static_cast<double>(nu);
    }
  }
  out.value = acc / static_cast<double>(nu);
  detail::softmax_pullback(p_s, grad_p, out.grad);
  return out;
}

// Linear anneal from beta_max at step 0 to beta_min at total_steps.
inline double beta_schedule(long step, long total_steps, const LossWeights& w) {
  if (total_steps < 1) throw config_error("beta_schedule: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw config_error("beta_schedule: step out of range");
  return w.beta_max + (w.beta_min - w.beta_max) * static_cast<double>(step) / total_steps;
}

// L_total = L_seg + lambda * L_unc
inline LossValue total_loss(const LossValue& seg, const LossValue& unc, double lambda) {
  if (seg.grad.v.size() != unc.grad.v.size())
    throw data_error("total_loss: gradient shape mismatch");
  LossValue out;
  out.value = seg.value + lambda * unc.value;
  out.grad = seg.grad;
  for (std::size_t i = 0; i < out.grad.v.size(); ++i)
    out.grad.v[i] += lambda * unc.grad.v[i];
  return out;
}

}  // namespace ucad
