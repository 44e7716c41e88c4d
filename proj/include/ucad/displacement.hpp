#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ucad/grid.hpp"
#include "ucad/rng.hpp"
#include "ucad/superpixel.hpp"

namespace ucad {

// Binary H x W mask.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t& at(int r, int c) { return bits[static_cast<std::size_t>(r) * width + c]; }
  std::size_t count_set() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  Mask complement() const {
    Mask m(height, width);
    for (std::size_t i = 0; i < bits.size(); ++i) m.bits[i] = bits[i] ? 0 : 1;
    return m;
  }
};

enum class MixDirection { LabeledIntoUnlabeled, UnlabeledIntoLabeled };

// Mixed sample: source pixels where mask=1, destination pixels where mask=0.
struct MixedSample {
  Grid2D image;
  LabelMap label;
  Mask mask;
  MixDirection direction = MixDirection::UnlabeledIntoLabeled;
};

// Per-region mean entropies U(s).
struct RegionUncertainty {
  std::vector<double> mean_entropy;
};

// Temperature-softmax sampling distribution over regions.
struct DisplacementDistribution {
  std::vector<double> probs;
  double temperature = 1.0;
};

// Per-pixel Shannon entropy, natural log, 0*log 0 := 0. Range [0, ln C].
inline Grid2D entropy_map(const ProbMap& p) {
  Grid2D h(p.height, p.width);
  const int C = p.num_classes;
  for (std::size_t px = 0; px < p.pixel_count(); ++px) {
    double acc = 0.0;
    for (int k = 0; k < C; ++k) {
      double q = p.v[px * C + k];
      if (q > 0.0) acc -= q * std::log(q);
    }
    h.values[px] = std::max(acc, 0.0);
  }
  return h;
}

inline RegionUncertainty region_uncertainty(const Grid2D& h, const SuperpixelPartition& part) {
  if (h.height != part.height || h.width != part.width)
    throw data_error("region_uncertainty: shape mismatch");
  RegionUncertainty u;
  u.mean_entropy.assign(part.num_regions, 0.0);
  std::vector<int> cnt(part.num_regions, 0);
  for (std::size_t px = 0; px < h.size(); ++px) {
    int rid = part.region_ids[px];
    u.mean_entropy[rid] += h.values[px];
    ++cnt[rid];
  }
  for (int k = 0; k < part.num_regions; ++k) u.mean_entropy[k] /= cnt[k];
  return u;
}

// P(s) = exp(U(s)/T) / sum exp(U(s')/T), max-subtracted.
inline DisplacementDistribution displacement_distribution(const RegionUncertainty& u, double t) {
  if (!(t > 0.0)) throw config_error("displacement_distribution: temperature must be > 0");
  DisplacementDistribution d;
  d.temperature = t;
  const std::size_t k = u.mean_entropy.size();
  d.probs.resize(k);
  double m = -std::numeric_limits<double>::infinity();
  for (double x : u.mean_entropy) m = std::max(m, x / t);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    d.probs[i] = std::exp(u.mean_entropy[i] / t - m);
    sum += d.probs[i];
  }
  for (double& p : d.probs) p /= sum;
  return d;
}

inline DisplacementDistribution uniform_distribution(int k) {
  DisplacementDistribution d;
  d.probs.assign(k, 1.0 / k);
  return d;
}

// n distinct region ids, drawn sequentially without replacement with
// renormalization over the remaining mass.
inline std::vector<int> sample_regions(const DisplacementDistribution& d, int n, RngStream& rng) {
  const int k = static_cast<int>(d.probs.size());
  if (n < 0 || n > k) throw config_error("sample_regions: n must be in [0, K]");
  std::vector<char> taken(k, 0);
  std::vector<int> out;
  out.reserve(n);
  for (int draw = 0; draw < n; ++draw) {
    double mass = 0.0;
    for (int i = 0; i < k; ++i)
      if (!taken[i]) mass += d.probs[i];
    double u = rng.next_double();
    int pick = -1;
    if (mass > 0.0) {
      double target = u * mass, acc = 0.0;
      for (int i = 0; i < k; ++i) {
        if (taken[i]) continue;
        acc += d.probs[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    }
    if (pick < 0) {
      // remaining mass is zero (or ran past it): uniform over the remainder
      int remaining = k - draw;
      int idx = std::min(static_cast<int>(u * remaining), remaining - 1);
      for (int i = 0; i < k; ++i) {
        if (taken[i]) continue;
        if (idx-- == 0) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = 1;
    out.push_back(pick);
  }
  return out;
}

inline Mask build_mask(const SuperpixelPartition& part, const std::vector<int>& selected) {
  std::vector<char> sel(part.num_regions, 0);
  for (int id : selected) {
    if (id < 0 || id >= part.num_regions) throw config_error("build_mask: unknown region id");
    sel[id] = 1;
  }
  Mask m(part.height, part.width);
  for (std::size_t px = 0; px < part.region_ids.size(); ++px)
    m.bits[px] = sel[part.region_ids[px]] ? 1 : 0;
  return m;
}

// X~ = M (.) X_a + (1-M) (.) X_b
inline Grid2D mix_images(const Grid2D& xa, const Grid2D& xb, const Mask& m) {
  check_same_shape(xa, xb, "mix_images");
  if (xa.height != m.height || xa.width != m.width)
    throw data_error("mix_images: mask shape mismatch");
  Grid2D out(xa.height, xa.width);
  for (std::size_t px = 0; px < out.size(); ++px)
    out.values[px] = m.bits[px] ? xa.values[px] : xb.values[px];
  return out;
}

// Integer select, no blending.
inline LabelMap mix_labels(const LabelMap& ya, const LabelMap& yb, const Mask& m) {
  if (ya.height != yb.height || ya.width != yb.width || ya.num_classes != yb.num_classes)
    throw data_error("mix_labels: shape/class-count mismatch");
  if (ya.height != m.height || ya.width != m.width)
    throw data_error("mix_labels: mask shape mismatch");
  LabelMap out(ya.height, ya.width, ya.num_classes);
  for (std::size_t px = 0; px < out.size(); ++px)
    out.labels[px] = m.bits[px] ? ya.labels[px] : yb.labels[px];
  return out;
}

struct DisplaceConfig {
  int k_target = 0;       // 0: scale as H*W/655, min 1
  double compactness = 10.0;
  int slic_iterations = 10;
  double temperature = 0.5;
  int n_regions = -1;     // <0: ceil(K/4)
  bool uncertainty_guided = true;  // false: uniform region selection
};

inline int auto_k_target(int h, int w) {
  long npix = static_cast<long>(h) * w;
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(npix) / 655.0)));
}

// Full pipeline of one displacement direction: partition the source image,
// score its regions by the teacher entropy of p_src, sample N regions, mask,
// and paste into the destination. Source is X_a (mask=1 pixels).
inline MixedSample displace_pair(const Grid2D& x_src, const LabelMap& y_src,
                                 const Grid2D& x_dst, const LabelMap& y_dst,
                                 const ProbMap& p_src, const DisplaceConfig& cfg,
                                 RngStream& rng, MixDirection direction) {
  check_same_shape(x_src, x_dst, "displace_pair");
  int k_target = cfg.k_target > 0 ? cfg.k_target : auto_k_target(x_src.height, x_src.width);
  SuperpixelPartition part = slic_partition(x_src, k_target, cfg.compactness, cfg.slic_iterations);
  DisplacementDistribution dist;
  if (cfg.uncertainty_guided) {
    Grid2D h = entropy_map(p_src);
    dist = displacement_distribution(region_uncertainty(h, part), cfg.temperature);
  } else {
    dist = uniform_distribution(part.num_regions);
  }
  int n = cfg.n_regions >= 0 ? cfg.n_regions : (part.num_regions + 3) / 4;
  n = std::min(n, part.num_regions);
  std::vector<int> selected = sample_regions(dist, n, rng);
  Mask m = build_mask(part, selected);
  MixedSample out;
  out.image = mix_images(x_src, x_dst, m);
  out.label = mix_labels(y_src, y_dst, m);
  out.mask = std::move(m);
  out.direction = direction;
  return out;
}

}  // namespace ucad
