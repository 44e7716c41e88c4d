#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "ucad/grid.hpp"
#include "ucad/model.hpp"

namespace ucad {

struct MetricsReport {
  std::vector<double> class_dsc;       // per class
  std::vector<double> class_asd;       // per class; meaningful iff asd_defined
  std::vector<bool> asd_defined;
  double mean_fg_dsc = 0.0;
  double mean_fg_asd = 0.0;
  bool mean_fg_asd_defined = false;
};

// 2|A n B| / (|A| + |B|) on the binary masks of class_id; both empty -> 1.
inline double dsc(const LabelMap& pred, const LabelMap& gt, int class_id) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw data_error("dsc: shape mismatch");
  long a = 0, b = 0, inter = 0;
  for (std::size_t px = 0; px < pred.size(); ++px) {
    bool pa = pred.labels[px] == class_id;
    bool pb = gt.labels[px] == class_id;
    a += pa;
    b += pb;
    inter += pa && pb;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * inter / static_cast<double>(a + b);
}

namespace detail {

// Boundary pixels of a class: class pixels with at least one 4-neighbor
// outside the class; the image border counts as outside.
inline std::vector<std::pair<int, int>> class_boundary(const LabelMap& y, int class_id) {
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < y.height; ++r) {
    for (int c = 0; c < y.width; ++c) {
      if (y.at(r, c) != class_id) continue;
      bool boundary = r == 0 || r == y.height - 1 || c == 0 || c == y.width - 1 ||
                      y.at(r - 1, c) != class_id || y.at(r + 1, c) != class_id ||
                      y.at(r, c - 1) != class_id || y.at(r, c + 1) != class_id;
      if (boundary) out.emplace_back(r, c);
    }
  }
  return out;
}

inline double mean_min_distance(const std::vector<std::pair<int, int>>& from,
                                const std::vector<std::pair<int, int>>& to) {
  double sum = 0.0;
  for (auto [r, c] : from) {
    double best = std::numeric_limits<double>::infinity();
    for (auto [r2, c2] : to) {
      double dy = r - r2, dx = c - c2;
      best = std::min(best, dy * dy + dx * dx);
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace detail

// Average Surface Distance. Both masks empty -> 0; exactly one empty -> nan
// (undefined, flagged by callers). Exact pairwise distances, no approximation.
inline double asd(const LabelMap& pred, const LabelMap& gt, int class_id) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw data_error("asd: shape mismatch");
  auto bp = detail::class_boundary(pred, class_id);
  auto bg = detail::class_boundary(gt, class_id);
  if (bp.empty() && bg.empty()) return 0.0;
  if (bp.empty() || bg.empty()) return std::numeric_limits<double>::quiet_NaN();
  return 0.5 * (detail::mean_min_distance(bp, bg) + detail::mean_min_distance(bg, bp));
}

// Per-class metrics averaged over images; ASD instances that are undefined for
// an image are excluded from that class's mean. Foreground = classes 1..C-1.
inline MetricsReport evaluate(const ModelParams& student,
                              const std::vector<std::pair<Grid2D, LabelMap>>& split) {
  if (split.empty()) throw data_error("evaluate: empty split");
  const int C = split[0].second.num_classes;
  MetricsReport rep;
  rep.class_dsc.assign(C, 0.0);
  rep.class_asd.assign(C, 0.0);
  rep.asd_defined.assign(C, false);
  std::vector<double> asd_sum(C, 0.0);
  std::vector<int> asd_n(C, 0);
  for (const auto& [img, gt] : split) {
    auto [logits, probs] = forward(student, img);
    LabelMap pred = argmax_labels(probs);
    for (int k = 0; k < C; ++k) {
      rep.class_dsc[k] += dsc(pred, gt, k);
      double a = asd(pred, gt, k);
      if (!std::isnan(a)) {
        asd_sum[k] += a;
        ++asd_n[k];
      }
    }
  }
  double fg_dsc = 0.0, fg_asd = 0.0;
  int fg_asd_n = 0;
  for (int k = 0; k < C; ++k) {
    rep.class_dsc[k] /= static_cast<double>(split.size());
    if (asd_n[k] > 0) {
      rep.class_asd[k] = asd_sum[k] / asd_n[k];
      rep.asd_defined[k] = true;
    } else {
      rep.class_asd[k] = std::numeric_limits<double>::quiet_NaN();
    }
    if (k > 0) {
      fg_dsc += rep.class_dsc[k];
      if (rep.asd_defined[k]) {
        fg_asd += rep.class_asd[k];
        ++fg_asd_n;
      }
    }
  }
  rep.mean_fg_dsc = C > 1 ? fg_dsc / (C - 1) : 0.0;
  if (fg_asd_n > 0) {
    rep.mean_fg_asd = fg_asd / fg_asd_n;
    rep.mean_fg_asd_defined = true;
  } else {
    rep.mean_fg_asd = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

inline void write_metrics_csv(const MetricsReport& rep, std::ostream& os) {
  os << "class,dsc,asd,defined\n";
  char buf[64];
  for (std::size_t k = 0; k < rep.class_dsc.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.10g", rep.class_dsc[k]);
    os << k << ',' << buf << ',';
    if (rep.asd_defined[k]) {
      std::snprintf(buf, sizeof buf, "%.10g", rep.class_asd[k]);
      os << buf << ",1\n";
    } else {
      os << ",0\n";
    }
  }
}

}  // namespace ucad
