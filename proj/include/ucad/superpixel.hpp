#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include "ucad/grid.hpp"

namespace ucad {

// Partition of the pixel domain into K nonempty, 4-connected, disjoint regions.
struct SuperpixelPartition {
  int height = 0;
  int width = 0;
  int num_regions = 0;
  std::vector<int> region_ids;

  int at(int r, int c) const { return region_ids[static_cast<std::size_t>(r) * width + c]; }
};

namespace detail {

inline Grid2D gradient_magnitude(const Grid2D& img) {
  Grid2D g(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      int rm = std::max(r - 1, 0), rp = std::min(r + 1, img.height - 1);
      int cm = std::max(c - 1, 0), cp = std::min(c + 1, img.width - 1);
      double dy = (img.at(rp, c) - img.at(rm, c)) * 0.5;
      double dx = (img.at(r, cp) - img.at(r, cm)) * 0.5;
      g.at(r, c) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return g;
}

// Seed grid factorization: maximize nx*ny <= k, then match the image aspect,
// then prefer the wider grid.
inline void seed_grid_dims(int k, int h, int w, int& nx, int& ny) {
  int best_nx = 1, best_ny = 1;
  long best_prod = -1;
  double best_aspect = std::numeric_limits<double>::infinity();
  for (int cand_nx = 1; cand_nx <= std::min(k, w); ++cand_nx) {
    int cand_ny = std::min(k / cand_nx, h);
    if (cand_ny < 1) continue;
    long prod = static_cast<long>(cand_nx) * cand_ny;
    double aspect = std::fabs(std::log((static_cast<double>(cand_nx) / cand_ny) *
                                       (static_cast<double>(h) / w)));
    bool better = prod > best_prod ||
                  (prod == best_prod && aspect < best_aspect - 1e-12) ||
                  (prod == best_prod && std::fabs(aspect - best_aspect) <= 1e-12 &&
                   cand_nx > best_nx);
    if (better) {
      best_prod = prod;
      best_aspect = aspect;
      best_nx = cand_nx;
      best_ny = cand_ny;
    }
  }
  nx = best_nx;
  ny = best_ny;
}

struct Component {
  int cluster = -1;
  int size = 0;
  int first_pixel = 0;
  std::vector<int> pixels;
};

}  // namespace detail

// SLIC on a single scalar channel. Feature space is (intensity, row, col);
// distance d^2 = d_int^2 + (compactness/S)^2 * d_spatial^2 with
// S = sqrt(H*W/k_target). Finishes with a connectivity pass that merges
// fragments smaller than (H*W/k_target)/4 (and any secondary component of a
// cluster, which keeps K <= k_target) into the largest adjacent region.
inline SuperpixelPartition slic_partition(const Grid2D& img, int k_target,
                                          double compactness, int iterations) {
  const int H = img.height, W = img.width;
  const long npix = static_cast<long>(H) * W;
  if (H < 1 || W < 1) throw data_error("slic_partition: empty image");
  if (k_target < 1 || k_target > npix)
    throw config_error("slic_partition: k_target must be in [1, H*W]");
  if (!(compactness > 0.0)) throw config_error("slic_partition: compactness must be > 0");
  if (iterations < 1) throw config_error("slic_partition: iterations must be >= 1");
  for (double v : img.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw config_error("slic_partition: image must be normalized to [0,1]");

  const double S = std::sqrt(static_cast<double>(npix) / k_target);
  const double spatial_w = (compactness / S) * (compactness / S);

  // Seeds on a regular grid, moved to the lowest-gradient pixel in a 3x3
  // neighborhood (strict improvement only, raster scan).
  Grid2D grad = detail::gradient_magnitude(img);
  int nx = 1, ny = 1;
  detail::seed_grid_dims(k_target, H, W, nx, ny);
  struct Center { double intensity, row, col; };
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      int r = std::clamp(static_cast<int>((i + 0.5) * H / ny - 0.5), 0, H - 1);
      int c = std::clamp(static_cast<int>((j + 0.5) * W / nx - 0.5), 0, W - 1);
      int br = r, bc = c;
      double bg = grad.at(r, c);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          if (grad.at(rr, cc) < bg) {
            bg = grad.at(rr, cc);
            br = rr;
            bc = cc;
          }
        }
      }
      centers.push_back({img.at(br, bc), static_cast<double>(br), static_cast<double>(bc)});
    }
  }
  const int K0 = static_cast<int>(centers.size());

  std::vector<int> assign(npix, -1);
  std::vector<double> best(npix, std::numeric_limits<double>::infinity());
  const int win = std::max(1, static_cast<int>(std::ceil(S)));

  for (int it = 0; it < iterations; ++it) {
    std::fill(assign.begin(), assign.end(), -1);
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < K0; ++k) {
      const Center& ct = centers[k];
      int r0 = std::max(0, static_cast<int>(ct.row) - win);
      int r1 = std::min(H - 1, static_cast<int>(ct.row) + win);
      int c0 = std::max(0, static_cast<int>(ct.col) - win);
      int c1 = std::min(W - 1, static_cast<int>(ct.col) + win);
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          std::size_t px = static_cast<std::size_t>(r) * W + c;
          double di = img.values[px] - ct.intensity;
          double dr = r - ct.row, dc = c - ct.col;
          double d2 = di * di + spatial_w * (dr * dr + dc * dc);
          if (d2 < best[px]) {
            best[px] = d2;
            assign[px] = k;
          }
        }
      }
    }
    // Pixels outside every window: nearest center globally.
    for (long px = 0; px < npix; ++px) {
      if (assign[px] >= 0) continue;
      int r = static_cast<int>(px / W), c = static_cast<int>(px % W);
      for (int k = 0; k < K0; ++k) {
        double di = img.values[px] - centers[k].intensity;
        double dr = r - centers[k].row, dc = c - centers[k].col;
        double d2 = di * di + spatial_w * (dr * dr + dc * dc);
        if (d2 < best[px]) {
          best[px] = d2;
          assign[px] = k;
        }
      }
    }
    // Recompute centers.
    std::vector<double> si(K0, 0.0), sr(K0, 0.0), sc(K0, 0.0);
    std::vector<int> cnt(K0, 0);
    for (long px = 0; px < npix; ++px) {
      int k = assign[px];
      si[k] += img.values[px];
      sr[k] += static_cast<double>(px / W);
      sc[k] += static_cast<double>(px % W);
      ++cnt[k];
    }
    for (int k = 0; k < K0; ++k) {
      if (cnt[k] > 0) {
        centers[k].intensity = si[k] / cnt[k];
        centers[k].row = sr[k] / cnt[k];
        centers[k].col = sc[k] / cnt[k];
      }
    }
  }

  // Connected components of the assignment (4-connectivity).
  std::vector<int> comp_of(npix, -1);
  std::vector<detail::Component> comps;
  std::vector<int> stack;
  for (long start = 0; start < npix; ++start) {
    if (comp_of[start] >= 0) continue;
    int id = static_cast<int>(comps.size());
    detail::Component cp;
    cp.cluster = assign[start];
    cp.first_pixel = static_cast<int>(start);
    stack.assign(1, static_cast<int>(start));
    comp_of[start] = id;
    while (!stack.empty()) {
      int px = stack.back();
      stack.pop_back();
      cp.pixels.push_back(px);
      int r = px / W, c = px % W;
      const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (auto& n : nb) {
        if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
        int q = n[0] * W + n[1];
        if (comp_of[q] < 0 && assign[q] == cp.cluster) {
          comp_of[q] = id;
          stack.push_back(q);
        }
      }
    }
    cp.size = static_cast<int>(cp.pixels.size());
    comps.push_back(std::move(cp));
  }

  // Survivors: the largest component of each cluster, provided it meets the
  // fragment threshold. Everything else merges.
  const double threshold = static_cast<double>(npix) / k_target / 4.0;
  std::vector<int> primary(K0, -1);
  for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
    int cl = comps[i].cluster;
    if (primary[cl] < 0 || comps[i].size > comps[primary[cl]].size ||
        (comps[i].size == comps[primary[cl]].size &&
         comps[i].first_pixel < comps[primary[cl]].first_pixel))
      primary[cl] = i;
  }
  std::vector<char> survives(comps.size(), 0);
  int n_surv = 0;
  for (int cl = 0; cl < K0; ++cl) {
    int i = primary[cl];
    if (i >= 0 && comps[i].size >= threshold) {
      survives[i] = 1;
      ++n_surv;
    }
  }
  if (n_surv == 0) {
    int biggest = 0;
    for (int i = 1; i < static_cast<int>(comps.size()); ++i)
      if (comps[i].size > comps[biggest].size) biggest = i;
    survives[biggest] = 1;
  }

  // Region map over survivors; merging components adopt the largest adjacent
  // assigned region, deferring until one is adjacent.
  std::vector<int> region(npix, -1);
  std::vector<int> region_size;
  std::vector<int> surv_region(comps.size(), -1);
  for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
    if (!survives[i]) continue;
    int rid = static_cast<int>(region_size.size());
    surv_region[i] = rid;
    region_size.push_back(comps[i].size);
    for (int px : comps[i].pixels) region[px] = rid;
  }
  std::vector<int> pending;
  for (int i = 0; i < static_cast<int>(comps.size()); ++i)
    if (!survives[i]) pending.push_back(i);
  while (!pending.empty()) {
    std::vector<int> deferred;
    bool progressed = false;
    for (int i : pending) {
      int best_rid = -1;
      for (int px : comps[i].pixels) {
        int r = px / W, c = px % W;
        const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (auto& n : nb) {
          if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
          int rid = region[n[0] * W + n[1]];
          if (rid >= 0 && (best_rid < 0 || region_size[rid] > region_size[best_rid] ||
                           (region_size[rid] == region_size[best_rid] && rid < best_rid)))
            best_rid = rid;
        }
      }
      if (best_rid < 0) {
        deferred.push_back(i);
        continue;
      }
      for (int px : comps[i].pixels) region[px] = best_rid;
      region_size[best_rid] += comps[i].size;
      progressed = true;
    }
    if (!progressed) throw numeric_error("slic_partition: connectivity merge stalled");
    pending.swap(deferred);
  }

  // Renumber 0..K-1 in raster order of first pixel.
  std::vector<int> remap(region_size.size(), -1);
  int next_id = 0;
  SuperpixelPartition part;
  part.height = H;
  part.width = W;
  part.region_ids.assign(npix, -1);
  for (long px = 0; px < npix; ++px) {
    int rid = region[px];
    if (remap[rid] < 0) remap[rid] = next_id++;
    part.region_ids[px] = remap[rid];
  }
  part.num_regions = next_id;
  return part;
}

// Plain-text export: one row per line, space-separated region ids.
inline void write_partition_text(const SuperpixelPartition& part, std::ostream& os) {
  for (int r = 0; r < part.height; ++r) {
    for (int c = 0; c < part.width; ++c) {
      if (c) os << ' ';
      os << part.at(r, c);
    }
    os << '\n';
  }
}

}  // namespace ucad
