#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ucad/grid.hpp"
#include "ucad/rng.hpp"

namespace ucad::testing {

inline Logits random_logits(int h, int w, int c, RngStream& rng, double scale = 2.0) {
  Logits z(h, w, c);
  for (double& v : z.v) v = (rng.next_double() * 2.0 - 1.0) * scale;
  return z;
}

inline ProbMap random_probs(int h, int w, int c, RngStream& rng) {
  return softmax_channels(random_logits(h, w, c, rng));
}

inline Grid2D random_image(int h, int w, RngStream& rng) {
  Grid2D g(h, w);
  for (double& v : g.values) v = rng.next_double();
  return g;
}

inline LabelMap random_labels(int h, int w, int c, RngStream& rng) {
  LabelMap y(h, w, c);
  for (int& v : y.labels) v = rng.next_int(c);
  return y;
}

// Central finite differences of a scalar function over a flat parameter
// vector; returns max relative error against the supplied analytic gradient.
inline double max_rel_error_fd(std::vector<double>& x,
                               const std::function<double()>& eval,
                               const std::vector<double>& analytic,
                               double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = x[i];
    x[i] = orig + step;
    double fp = eval();
    x[i] = orig - step;
    double fm = eval();
    x[i] = orig;
    double fd = (fp - fm) / (2.0 * step);
    double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-6});
    worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace ucad::testing
