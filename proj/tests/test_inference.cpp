#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "siamman/inference.hpp"
#include "siamman/rng.hpp"

using namespace siamman;

TEST_CASE("cosine window endpoints, peak and symmetry") {
  Tensor w = cosine_window(7, 5);
  CHECK(w.shape == std::vector<int>{5, 7});
  CHECK(w.at2(0, 0) == 0.0);
  CHECK(w.at2(4, 6) == 0.0);
  CHECK(w.at2(2, 3) == doctest::Approx(1.0).epsilon(1e-15));
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      CHECK(w.at2(y, x) == doctest::Approx(w.at2(4 - y, x)).epsilon(1e-12));
      CHECK(w.at2(y, x) == doctest::Approx(w.at2(y, 6 - x)).epsilon(1e-12));
    }
  CHECK(cosine_window(1, 1).data[0] == 1.0);
  CHECK_THROWS(cosine_window(0, 3));
}

TEST_CASE("scale penalty identities and closed form") {
  Box prev{0, 0, 64, 64};
  CHECK(scale_penalty_one(prev, prev, 0.04) == doctest::Approx(1.0).epsilon(1e-15));

  // doubling the width only, k_pen = 0.04: closed-form oracle
  Box wide{0, 0, 128, 64};
  const double r_c = 2.0;  // aspect 2 vs 1
  const double s_prev = std::sqrt((64 + 64.0) * (64 + 64.0));
  const double p_w = (128 + 64) / 2.0;
  const double s_cand = std::sqrt((128 + p_w) * (64 + p_w));
  const double s_c = std::max(s_cand / s_prev, s_prev / s_cand);
  const double want = std::exp(-0.04 * (r_c * s_c - 1.0));
  CHECK(scale_penalty_one(wide, prev, 0.04) == doctest::Approx(want).epsilon(1e-14));

  // always in (0,1], monotone in the change factor
  Rng rng(5);
  double last = 1.0;
  for (double grow = 1.0; grow < 3.0; grow += 0.25) {
    Box c{0, 0, 64 * grow, 64 / grow};
    const double rho = scale_penalty_one(c, prev, 0.04);
    CHECK(rho > 0.0);
    CHECK(rho <= 1.0 + 1e-15);
    CHECK(rho <= last + 1e-15);
    last = rho;
  }
}

TEST_CASE("fuse_scores hand value and monotonicity") {
  FusionConfig cfg;  // 0.7 / 0.6
  Tensor u({1, 1, 1}, 1.0);
  Tensor c({1, 1, 1}, 0.0);
  Tensor xi({1, 1}, 0.0);
  Tensor rho({1, 1, 1}, 1.0);
  Tensor theta = fuse_scores(u, c, xi, rho, cfg);
  CHECK(theta.data[0] == doctest::Approx(0.42).epsilon(1e-13));

  // degenerate weights collapse the fusion to u
  FusionConfig deg;
  deg.omega2 = 1.0;
  Rng rng(3);
  Tensor u2({2, 3, 3});
  for (auto& v : u2.data) v = rng.uniform();
  Tensor c2({1, 3, 3});
  for (auto& v : c2.data) v = rng.uniform();
  Tensor xi2 = cosine_window(3, 3);
  Tensor ones({2, 3, 3}, 1.0);
  FusionConfig degu = deg;
  degu.omega1 = 1.0;
  Tensor t2 = fuse_scores(u2, c2, xi2, ones, degu);
  CHECK(t2.data == u2.data);

  // omega2 = 1, rho = 1, u = c (each anchor plane equal to c): theta = u
  Tensor uc({2, 3, 3});
  for (int m = 0; m < 2; ++m)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) uc.at3(m, y, x) = c2.at3(0, y, x);
  Tensor tuc = fuse_scores(uc, c2, xi2, ones, deg);
  for (std::size_t i = 0; i < tuc.data.size(); ++i)
    CHECK(tuc.data[i] == doctest::Approx(uc.data[i]).epsilon(1e-15));

  // monotone non-decreasing in u, c, xi
  Tensor base = fuse_scores(u2, c2, xi2, ones, cfg);
  Tensor u3 = u2;
  u3.at3(1, 1, 1) += 0.1;
  CHECK(fuse_scores(u3, c2, xi2, ones, cfg).at3(1, 1, 1) > base.at3(1, 1, 1));
  Tensor c3 = c2;
  c3.at3(0, 1, 1) += 0.1;
  CHECK(fuse_scores(u2, c3, xi2, ones, cfg).at3(1, 1, 1) > base.at3(1, 1, 1));

  // non-negative and finite given probabilities in range
  for (double v : base.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  CHECK_THROWS(fuse_scores(u2, Tensor({2, 3, 3}), xi2, ones, cfg));
}

TEST_CASE("selection: argmax, tie-break, interpolation endpoints, scaling invariance") {
  AnchorConfig acfg;
  AnchorSet anchors = generate_anchors(5, 5, acfg);
  Rng rng(11);
  Tensor o_reg({4 * anchors.k, 5, 5});
  for (auto& v : o_reg.data) v = rng.normal() * 0.1;

  Tensor theta({anchors.k, 5, 5}, 0.1);
  theta.at3(2, 3, 1) = 0.9;
  TrackState prev{Box{0, 0, 60, 60}, 0.5};
  FusionConfig cfg;

  Selection sel;
  TrackState next = select_and_update(theta, o_reg, anchors, prev, cfg, false, &sel);
  CHECK(sel.m == 2);
  CHECK(sel.y == 3);
  CHECK(sel.x == 1);
  // exhaustive argmax oracle
  double best = -1;
  int bm = 0, by = 0, bx = 0;
  for (int m = 0; m < anchors.k; ++m)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x)
        if (theta.at3(m, y, x) > best) best = theta.at3(m, y, x), bm = m, by = y, bx = x;
  CHECK(bm == sel.m);
  CHECK(by == sel.y);
  CHECK(bx == sel.x);
  CHECK(next.score == doctest::Approx(0.9));

  // positive scaling of theta leaves the selection unchanged
  Tensor theta2 = theta;
  for (auto& v : theta2.data) v *= 3.7;
  Selection sel2;
  select_and_update(theta2, o_reg, anchors, prev, cfg, false, &sel2);
  CHECK(sel2.m == sel.m);
  CHECK(sel2.y == sel.y);
  CHECK(sel2.x == sel.x);

  // ties break to the lowest flat index
  Tensor flat({anchors.k, 5, 5}, 0.25);
  Selection selt;
  select_and_update(flat, o_reg, anchors, prev, cfg, false, &selt);
  CHECK(selt.m == 0);
  CHECK(selt.y == 0);
  CHECK(selt.x == 0);

  // eta endpoints: eta0 = 0 keeps the size, huge eta0 adopts the raw size
  FusionConfig keep = cfg;
  keep.eta0 = 0.0;
  TrackState kept = select_and_update(theta, o_reg, anchors, prev, keep);
  CHECK(kept.box.w == prev.box.w);
  CHECK(kept.box.h == prev.box.h);
  FusionConfig full = cfg;
  full.eta0 = 1e9;  // clamped to 1
  Selection self;
  TrackState raw = select_and_update(theta, o_reg, anchors, prev, full, false, &self);
  CHECK(raw.box.w == doctest::Approx(self.raw.w).epsilon(1e-12));
  CHECK(raw.box.h == doctest::Approx(self.raw.h).epsilon(1e-12));
  // the center is adopted directly in both cases
  CHECK(kept.box.cx == doctest::Approx(self.raw.cx).epsilon(1e-12));
}

TEST_CASE("omega2=1 with unit rho reduces to the appearance argmax") {
  AnchorConfig acfg;
  AnchorSet anchors = generate_anchors(7, 7, acfg);
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor u({anchors.k, 7, 7});
    for (auto& v : u.data) v = rng.uniform();
    Tensor c({1, 7, 7});
    for (auto& v : c.data) v = rng.uniform();
    Tensor xi = cosine_window(7, 7);
    Tensor ones({anchors.k, 7, 7}, 1.0);
    FusionConfig cfg;
    cfg.omega2 = 1.0;
    Tensor theta = fuse_scores(u, c, xi, ones, cfg);
    std::size_t best = 0;
    for (std::size_t i = 1; i < theta.data.size(); ++i)
      if (theta.data[i] > theta.data[best]) best = i;
    // oracle: argmax of w1*u + (1-w1)*c expanded over anchors
    std::size_t want = 0;
    double wbest = -1;
    const std::size_t hw = 49;
    for (std::size_t i = 0; i < theta.data.size(); ++i) {
      const double v = cfg.omega1 * u.data[i] + (1 - cfg.omega1) * c.data[i % hw];
      if (v > wbest) wbest = v, want = i;
    }
    CHECK(best == want);
  }
}

TEST_CASE("track_sequence basic contracts") {
  ModelConfig mc;
  mc.backbone.channels = 8;
  mc.backbone.search_size = 191;
  SiamMan model(mc, 17);
  Rng rng(41);
  Tensor frame({3, 96, 96});
  for (auto& v : frame.data) v = rng.uniform() * 0.5;
  FrameProvider frames = [&](int) { return frame; };
  TrackerConfig cfg;

  // one-frame sequence: output is exactly the init state with score 1
  Box init{48, 48, 30, 24};
  auto one = track_sequence(model, frames, 1, init, cfg);
  REQUIRE(one.size() == 1);
  CHECK(one[0].box.cx == init.cx);
  CHECK(one[0].box.w == init.w);
  CHECK(one[0].score == 1.0);

  // deterministic: identical inputs give bitwise-identical trajectories
  auto a = track_sequence(model, frames, 4, init, cfg);
  auto b = track_sequence(model, frames, 4, init, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].box.cx == b[i].box.cx);
    CHECK(a[i].box.cy == b[i].box.cy);
    CHECK(a[i].box.w == b[i].box.w);
    CHECK(a[i].box.h == b[i].box.h);
    CHECK(a[i].score == b[i].score);
  }

  CHECK_THROWS(track_sequence(model, frames, 0, init, cfg));
  CHECK_THROWS(track_sequence(model, frames, 2, Box{1, 1, 0, 5}, cfg));
}
