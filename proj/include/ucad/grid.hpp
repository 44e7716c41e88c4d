#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ucad/errors.hpp"

namespace ucad {

// Dense H x W scalar field, row-major: index (r, c) -> r*W + c.
struct Grid2D {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Grid2D() = default;
  Grid2D(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return values.size(); }
};

// H x W integer labels in {0..C-1}.
struct LabelMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int h, int w, int c, int fill = 0)
      : height(h), width(w), num_classes(c), labels(static_cast<std::size_t>(h) * w, fill) {}

  int& at(int r, int c) { return labels[static_cast<std::size_t>(r) * width + c]; }
  int at(int r, int c) const { return labels[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return labels.size(); }
};

// H x W x C real field, row-major with class fastest: ((r*W + c)*C + k).
// Used both for raw logits and for normalized probability maps.
struct ClassField {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<double> v;

  ClassField() = default;
  ClassField(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), num_classes(c),
        v(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int r, int c, int k) {
    return v[(static_cast<std::size_t>(r) * width + c) * num_classes + k];
  }
  double at(int r, int c, int k) const {
    return v[(static_cast<std::size_t>(r) * width + c) * num_classes + k];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

using Logits = ClassField;
using ProbMap = ClassField;

inline void check_same_shape(const Grid2D& a, const Grid2D& b, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw data_error(std::string(what) + ": shape mismatch");
}

inline bool is_valid_prob_map(const ProbMap& p, double tol = 1e-6) {
  for (std::size_t px = 0; px < p.pixel_count(); ++px) {
    double sum = 0.0;
    for (int k = 0; k < p.num_classes; ++k) {
      double q = p.v[px * p.num_classes + k];
      if (!(q >= 0.0) || !std::isfinite(q)) return false;
      sum += q;
    }
    if (std::fabs(sum - 1.0) > tol) return false;
  }
  return true;
}

// Per-pixel softmax over the class axis, max-subtracted for stability.
inline ProbMap softmax_channels(const Logits& logits) {
  if (logits.height < 1 || logits.width < 1 || logits.num_classes < 2)
    throw data_error("softmax_channels: bad shape");
  for (double z : logits.v)
    if (!std::isfinite(z)) throw data_error("softmax_channels: non-finite logit");

  ProbMap out(logits.height, logits.width, logits.num_classes);
  const int C = logits.num_classes;
  for (std::size_t px = 0; px < logits.pixel_count(); ++px) {
    const double* z = &logits.v[px * C];
    double* p = &out.v[px * C];
    double m = z[0];
    for (int k = 1; k < C; ++k) m = std::max(m, z[k]);
    double sum = 0.0;
    for (int k = 0; k < C; ++k) {
      p[k] = std::exp(z[k] - m);
      sum += p[k];
    }
    for (int k = 0; k < C; ++k) p[k] /= sum;
  }
  return out;
}

// Per-pixel argmax; ties break toward the lowest class index.
inline LabelMap argmax_labels(const ProbMap& p) {
  LabelMap out(p.height, p.width, p.num_classes);
  const int C = p.num_classes;
  for (std::size_t px = 0; px < p.pixel_count(); ++px) {
    const double* q = &p.v[px * C];
    int best = 0;
    for (int k = 1; k < C; ++k)
      if (q[k] > q[best]) best = k;
    out.labels[px] = best;
  }
  return out;
}

inline ProbMap one_hot(const LabelMap& y) {
  ProbMap out(y.height, y.width, y.num_classes, 0.0);
  for (std::size_t px = 0; px < y.size(); ++px) {
    int c = y.labels[px];
    if (c < 0 || c >= y.num_classes) throw data_error("one_hot: label out of range");
    out.v[px * y.num_classes + c] = 1.0;
  }
  return out;
}

}  // namespace ucad
