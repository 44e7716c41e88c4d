#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ucad/displacement.hpp"
#include "ucad/grid.hpp"
#include "ucad/rng.hpp"

namespace ucad {

// Fixed per-pixel features: intensity, box blur r=1, box blur r=3, gradient
// magnitude (central differences, clamped borders), normalized row, col.
constexpr int kFeatureCount = 6;

inline std::vector<double> extract_features(const Grid2D& img) {
  const int H = img.height, W = img.width;
  std::vector<double> f(static_cast<std::size_t>(H) * W * kFeatureCount);
  auto blur = [&](int r, int c, int rad) {
    double sum = 0.0;
    int n = 0;
    for (int rr = std::max(0, r - rad); rr <= std::min(H - 1, r + rad); ++rr)
      for (int cc = std::max(0, c - rad); cc <= std::min(W - 1, c + rad); ++cc) {
        sum += img.at(rr, cc);
        ++n;
      }
    return sum / n;
  };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      int rm = std::max(r - 1, 0), rp = std::min(r + 1, H - 1);
      int cm = std::max(c - 1, 0), cp = std::min(c + 1, W - 1);
      double dy = (img.at(rp, c) - img.at(rm, c)) * 0.5;
      double dx = (img.at(r, cp) - img.at(r, cm)) * 0.5;
      double* out = &f[(static_cast<std::size_t>(r) * W + c) * kFeatureCount];
      out[0] = img.at(r, c);
      out[1] = blur(r, c, 1);
      out[2] = blur(r, c, 3);
      out[3] = std::sqrt(dx * dx + dy * dy);
      out[4] = H > 1 ? static_cast<double>(r) / (H - 1) : 0.0;
      out[5] = W > 1 ? static_cast<double>(c) / (W - 1) : 0.0;
    }
  }
  return f;
}

// Per-pixel two-layer MLP, weights shared across pixels.
// z1 = W1^T f + b1, h = relu(z1), logits = W2^T h + b2.
struct ModelParams {
  int feat = kFeatureCount;
  int hidden = 0;
  int classes = 0;
  std::vector<double> w1;  // feat x hidden
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden x classes
  std::vector<double> b2;  // classes

  ModelParams() = default;
  ModelParams(int hdim, int c)
      : hidden(hdim), classes(c), w1(static_cast<std::size_t>(kFeatureCount) * hdim, 0.0),
        b1(hdim, 0.0), w2(static_cast<std::size_t>(hdim) * c, 0.0), b2(c, 0.0) {}

  std::array<std::vector<double>*, 4> tensors() { return {&w1, &b1, &w2, &b2}; }
  std::array<const std::vector<double>*, 4> tensors() const { return {&w1, &b1, &w2, &b2}; }
};

using ModelGrads = ModelParams;

// He-style init scaled by fan-in; biases start at zero.
inline ModelParams random_init(int hdim, int c, RngStream& rng) {
  ModelParams p(hdim, c);
  double s1 = std::sqrt(2.0 / kFeatureCount);
  double s2 = std::sqrt(2.0 / hdim);
  for (double& v : p.w1) v = rng.next_gaussian() * s1;
  for (double& v : p.w2) v = rng.next_gaussian() * s2;
  return p;
}

inline std::pair<Logits, ProbMap> forward(const ModelParams& p, const Grid2D& img) {
  if (p.hidden < 1 || p.classes < 2) throw data_error("forward: uninitialized params");
  const std::vector<double> feats = extract_features(img);
  const std::size_t npx = static_cast<std::size_t>(img.height) * img.width;
  Logits logits(img.height, img.width, p.classes, 0.0);
  std::vector<double> h(p.hidden);
  for (std::size_t px = 0; px < npx; ++px) {
    const double* f = &feats[px * kFeatureCount];
    for (int j = 0; j < p.hidden; ++j) {
      double z = p.b1[j];
      for (int i = 0; i < p.feat; ++i) z += p.w1[static_cast<std::size_t>(i) * p.hidden + j] * f[i];
      h[j] = z > 0.0 ? z : 0.0;
    }
    double* z2 = &logits.v[px * p.classes];
    for (int k = 0; k < p.classes; ++k) {
      double z = p.b2[k];
      for (int j = 0; j < p.hidden; ++j)
        z += p.w2[static_cast<std::size_t>(j) * p.classes + k] * h[j];
      z2[k] = z;
    }
  }
  ProbMap probs = softmax_channels(logits);
  return {std::move(logits), std::move(probs)};
}

// Exact chain rule; ReLU subgradient at 0 is 0.
inline ModelGrads backward(const ModelParams& p, const Grid2D& img, const Logits& grad_logits) {
  if (grad_logits.height != img.height || grad_logits.width != img.width ||
      grad_logits.num_classes != p.classes)
    throw data_error("backward: shape mismatch");
  const std::vector<double> feats = extract_features(img);
  const std::size_t npx = static_cast<std::size_t>(img.height) * img.width;
  ModelGrads g(p.hidden, p.classes);
  std::vector<double> z1(p.hidden), h(p.hidden), dz1(p.hidden);
  for (std::size_t px = 0; px < npx; ++px) {
    const double* f = &feats[px * kFeatureCount];
    for (int j = 0; j < p.hidden; ++j) {
      double z = p.b1[j];
      for (int i = 0; i < p.feat; ++i) z += p.w1[static_cast<std::size_t>(i) * p.hidden + j] * f[i];
      z1[j] = z;
      h[j] = z > 0.0 ? z : 0.0;
    }
    const double* gz = &grad_logits.v[px * p.classes];
    for (int k = 0; k < p.classes; ++k) {
      g.b2[k] += gz[k];
      for (int j = 0; j < p.hidden; ++j)
        g.w2[static_cast<std::size_t>(j) * p.classes + k] += h[j] * gz[k];
    }
    for (int j = 0; j < p.hidden; ++j) {
      double dh = 0.0;
      for (int k = 0; k < p.classes; ++k)
        dh += p.w2[static_cast<std::size_t>(j) * p.classes + k] * gz[k];
      dz1[j] = z1[j] > 0.0 ? dh : 0.0;
      g.b1[j] += dz1[j];
      for (int i = 0; i < p.feat; ++i)
        g.w1[static_cast<std::size_t>(i) * p.hidden + j] += f[i] * dz1[j];
    }
  }
  return g;
}

struct OptimState {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ModelParams velocity;  // same shapes, zero-initialized

  OptimState() = default;
  OptimState(int hdim, int c, double lr_, double mom, double wd)
      : lr(lr_), momentum(mom), weight_decay(wd), velocity(hdim, c) {}
};

// g' = g + wd*p; v <- momentum*v + g'; p <- p - lr*v
inline void sgd_step(ModelParams& params, const ModelGrads& grads, OptimState& opt) {
  auto pt = params.tensors();
  auto gt = grads.tensors();
  auto vt = opt.velocity.tensors();
  for (int t = 0; t < 4; ++t) {
    if (pt[t]->size() != gt[t]->size() || pt[t]->size() != vt[t]->size())
      throw data_error("sgd_step: shape mismatch");
    for (double gv : *gt[t])
      if (!std::isfinite(gv)) throw numeric_error("sgd_step: non-finite gradient");
    for (std::size_t i = 0; i < pt[t]->size(); ++i) {
      double g = (*gt[t])[i] + opt.weight_decay * (*pt[t])[i];
      (*vt[t])[i] = opt.momentum * (*vt[t])[i] + g;
      (*pt[t])[i] -= opt.lr * (*vt[t])[i];
    }
  }
}

// teacher <- alpha*teacher + (1-alpha)*student
inline ModelParams ema_update(const ModelParams& teacher, const ModelParams& student, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw config_error("ema_update: alpha must be in [0,1]");
  ModelParams out = teacher;
  auto ot = out.tensors();
  auto st = student.tensors();
  for (int t = 0; t < 4; ++t) {
    if (ot[t]->size() != st[t]->size()) throw data_error("ema_update: shape mismatch");
    for (std::size_t i = 0; i < ot[t]->size(); ++i)
      (*ot[t])[i] = alpha * (*ot[t])[i] + (1.0 - alpha) * (*st[t])[i];
  }
  return out;
}

// Teacher inference: argmax pseudo-label plus per-pixel entropy.
inline std::pair<LabelMap, Grid2D> pseudo_label(const ModelParams& teacher, const Grid2D& x_u) {
  auto [logits, probs] = forward(teacher, x_u);
  return {argmax_labels(probs), entropy_map(probs)};
}

// Checkpoint: "UCAD1", int32 LE {F, Hdim, C}, then float64 LE w1, b1, w2, b2.
inline void save_checkpoint(const std::string& path, const ModelParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("save_checkpoint: cannot open " + path);
  os.write("UCAD1", 5);
  auto put_i32 = [&](std::int32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  put_i32(p.feat);
  put_i32(p.hidden);
  put_i32(p.classes);
  auto put_f64 = [&](double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
  };
  for (auto* t : p.tensors())
    for (double v : *t) put_f64(v);
  if (!os) throw data_error("save_checkpoint: write failed for " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("load_checkpoint: cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "UCAD1", 5) != 0)
    throw data_error("load_checkpoint: bad magic in " + path);
  auto get_i32 = [&]() {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw data_error("load_checkpoint: truncated header in " + path);
    return static_cast<std::int32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                     (static_cast<std::uint32_t>(b[3]) << 24));
  };
  std::int32_t f = get_i32(), hdim = get_i32(), c = get_i32();
  if (f != kFeatureCount || hdim < 1 || c < 2)
    throw data_error("load_checkpoint: bad dimensions in " + path);
  ModelParams p(hdim, c);
  auto get_f64 = [&]() {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw data_error("load_checkpoint: truncated payload in " + path);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  };
  for (auto* t : p.tensors())
    for (double& v : *t) v = get_f64();
  return p;
}

}  // namespace ucad
