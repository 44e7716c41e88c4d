#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "helpers.hpp"
#include "ucad/losses.hpp"
#include "ucad/model.hpp"

using namespace ucad;

TEST_CASE("feature extraction basics") {
  Grid2D img(3, 3, 0.4);
  std::vector<double> f = extract_features(img);
  REQUIRE(f.size() == 9u * kFeatureCount);
  // constant image: intensity == blurs, zero gradient magnitude
  for (int px = 0; px < 9; ++px) {
    REQUIRE(f[px * kFeatureCount + 0] == 0.4);
    REQUIRE(f[px * kFeatureCount + 1] == Catch::Approx(0.4).margin(1e-15));
    REQUIRE(f[px * kFeatureCount + 2] == Catch::Approx(0.4).margin(1e-15));
    REQUIRE(f[px * kFeatureCount + 3] == 0.0);
  }
  // normalized coordinates at the corners
  REQUIRE(f[0 * kFeatureCount + 4] == 0.0);
  REQUIRE(f[0 * kFeatureCount + 5] == 0.0);
  REQUIRE(f[8 * kFeatureCount + 4] == 1.0);
  REQUIRE(f[8 * kFeatureCount + 5] == 1.0);
}

TEST_CASE("zero-parameter model emits uniform probabilities") {
  ModelParams p(4, 3);
  Grid2D img(2, 2, 0.5);
  auto [logits, probs] = forward(p, img);
  for (double z : logits.v) REQUIRE(z == 0.0);
  for (double v : probs.v) REQUIRE(v == Catch::Approx(1.0 / 3).margin(1e-12));
}

TEST_CASE("forward rejects uninitialized params") {
  ModelParams p;
  Grid2D img(2, 2, 0.5);
  REQUIRE_THROWS_AS(forward(p, img), data_error);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  RngStream rng(1);
  ModelParams p = random_init(8, 3, rng);
  Grid2D img = testing::random_image(4, 4, rng);
  ModelGrads g = backward(p, img, Logits(4, 4, 3, 0.0));
  for (auto* t : g.tensors())
    for (double v : *t) REQUIRE(v == 0.0);
}

TEST_CASE("full model gradient matches finite differences") {
  RngStream rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams p = random_init(6, 3, rng);
    Grid2D img = testing::random_image(4, 4, rng);
    LabelMap yl = testing::random_labels(4, 4, 3, rng);
    LabelMap yp = testing::random_labels(4, 4, 3, rng);
    ProbMap pt = testing::random_probs(4, 4, 3, rng);
    Mask m(4, 4);
    for (auto& b : m.bits) b = rng.next_int(2);
    LossWeights w;
    double beta = 0.5 + rng.next_double();
    auto eval = [&] {
      auto [z, probs] = forward(p, img);
      return total_loss(seg_loss(probs, yl, yp, m, w),
                        unc_loss(probs, pt, m.complement(), beta), w.lambda)
          .value;
    };
    auto [z, probs] = forward(p, img);
    LossValue t = total_loss(seg_loss(probs, yl, yp, m, w),
                             unc_loss(probs, pt, m.complement(), beta), w.lambda);
    ModelGrads g = backward(p, img, t.grad);
    auto pts = p.tensors();
    auto gts = g.tensors();
    for (int ti = 0; ti < 4; ++ti)
      REQUIRE(testing::max_rel_error_fd(*pts[ti], eval, *gts[ti]) <= 1e-4);
  }
}

TEST_CASE("sgd_step hand cases") {
  // p=1, g=1, lr=0.1, momentum=0, wd=0 -> p=0.9
  {
    ModelParams p(1, 2);
    ModelGrads g(1, 2);
    p.w1[0] = 1.0;
    g.w1[0] = 1.0;
    OptimState opt(1, 2, 0.1, 0.0, 0.0);
    sgd_step(p, g, opt);
    REQUIRE(p.w1[0] == 0.9);
  }
  // p=1, g=1, lr=0.1, momentum=0, wd=1e-4 -> p=0.89999
  {
    ModelParams p(1, 2);
    ModelGrads g(1, 2);
    p.w1[0] = 1.0;
    g.w1[0] = 1.0;
    OptimState opt(1, 2, 0.1, 0.0, 1e-4);
    sgd_step(p, g, opt);
    REQUIRE(p.w1[0] == Catch::Approx(0.89999).margin(1e-15));
  }
  // two steps, g=1 each, momentum=0.9, lr=0.1, wd=0 -> v=1 then 1.9; p=0.9 then 0.71
  {
    ModelParams p(1, 2);
    ModelGrads g(1, 2);
    p.w1[0] = 1.0;
    g.w1[0] = 1.0;
    OptimState opt(1, 2, 0.1, 0.9, 0.0);
    sgd_step(p, g, opt);
    REQUIRE(opt.velocity.w1[0] == 1.0);
    REQUIRE(p.w1[0] == Catch::Approx(0.9).margin(1e-15));
    sgd_step(p, g, opt);
    REQUIRE(opt.velocity.w1[0] == Catch::Approx(1.9).margin(1e-15));
    REQUIRE(p.w1[0] == Catch::Approx(0.71).margin(1e-15));
  }
}

TEST_CASE("sgd_step rejects non-finite gradients") {
  ModelParams p(1, 2);
  ModelGrads g(1, 2);
  g.w2[0] = std::numeric_limits<double>::quiet_NaN();
  OptimState opt(1, 2, 0.1, 0.9, 0.0);
  REQUIRE_THROWS_AS(sgd_step(p, g, opt), numeric_error);
}

TEST_CASE("ema_update hand cases and linearity") {
  RngStream rng(3);
  ModelParams t = random_init(3, 2, rng);
  ModelParams s = random_init(3, 2, rng);

  ModelParams a0 = ema_update(t, s, 0.0);
  ModelParams a1 = ema_update(t, s, 1.0);
  for (int ti = 0; ti < 4; ++ti) {
    REQUIRE(*a0.tensors()[ti] == *s.tensors()[ti]);
    REQUIRE(*a1.tensors()[ti] == *t.tensors()[ti]);
  }

  ModelParams zero(3, 2), one(3, 2);
  for (auto* tv : one.tensors())
    for (double& v : *tv) v = 1.0;
  ModelParams mix = ema_update(zero, one, 0.9);
  for (auto* tv : mix.tensors())
    for (double v : *tv) REQUIRE(v == Catch::Approx(0.1).margin(1e-15));

  // ema(t, s, a) - s = a * (t - s), element-wise
  ModelParams e = ema_update(t, s, 0.37);
  for (int ti = 0; ti < 4; ++ti) {
    const auto& ev = *e.tensors()[ti];
    const auto& tv = *t.tensors()[ti];
    const auto& sv = *s.tensors()[ti];
    for (std::size_t i = 0; i < ev.size(); ++i)
      REQUIRE(ev[i] - sv[i] == Catch::Approx(0.37 * (tv[i] - sv[i])).margin(1e-15));
  }

  REQUIRE_THROWS_AS(ema_update(t, s, 1.5), config_error);
}

TEST_CASE("pseudo_label on a zero-parameter teacher") {
  ModelParams teacher(4, 3);
  Grid2D img(3, 3, 0.2);
  auto [labels, unc] = pseudo_label(teacher, img);
  for (int y : labels.labels) REQUIRE(y == 0);  // uniform probs, tie to lowest
  for (double h : unc.values) REQUIRE(h == Catch::Approx(std::log(3.0)).margin(1e-12));
}

TEST_CASE("checkpoint round trip is exact") {
  RngStream rng(4);
  ModelParams p = random_init(16, 3, rng);
  std::string path = "test_model_ckpt.bin";
  save_checkpoint(path, p);
  ModelParams q = load_checkpoint(path);
  REQUIRE(q.hidden == p.hidden);
  REQUIRE(q.classes == p.classes);
  for (int ti = 0; ti < 4; ++ti) REQUIRE(*q.tensors()[ti] == *p.tensors()[ti]);
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(load_checkpoint("no_such_file.bin"), data_error);
}
