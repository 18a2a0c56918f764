#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "siamman/config.hpp"

using namespace siamman;

TEST_CASE("defaults match the documented values") {
  RunConfig cfg;
  CHECK(cfg.model.backbone.channels == 32);
  CHECK(cfg.model.backbone.exemplar_size == 127);
  CHECK(cfg.model.backbone.search_size == 255);
  CHECK(cfg.model.k == 5);
  CHECK(cfg.anchors.stride == 8);
  CHECK(cfg.anchors.scale == 8.0);
  REQUIRE(cfg.anchors.ratios.size() == 5);
  CHECK(cfg.anchors.ratios[0] == doctest::Approx(1.0 / 3));
  CHECK(cfg.anchors.pos_thresh == 0.6);
  CHECK(cfg.anchors.neg_thresh == 0.3);
  CHECK(cfg.fusion.omega1 == 0.7);
  CHECK(cfg.fusion.omega2 == 0.6);
  CHECK(cfg.fusion.k_pen == 0.04);
  CHECK(cfg.fusion.eta0 == 0.3);
  CHECK(cfg.train.momentum == 0.9);
  CHECK(cfg.train.weight_decay == 1e-4);
  CHECK(cfg.train.lr_initial == 0.001);
  CHECK(cfg.train.lr_peak == 0.005);
  CHECK(cfg.train.lr_final == 0.0005);
  CHECK(cfg.train.iters_per_epoch == 200);
  CHECK(cfg.train.pos_fraction == 0.8);
  CHECK(cfg.train.max_frame_interval == 100);
  CHECK(cfg.train.s1a == 10);
  CHECK(cfg.train.s3a == 15);
  CHECK(cfg.train.s3b == 5);
  CHECK(cfg.train.lambdas.cls == 1.0);
  CHECK(cfg.train.lambdas.reg == 1.0);
  CHECK(cfg.train.lambdas.loc == 1.0);
}

TEST_CASE("round trip: parse(serialize(cfg)) == cfg") {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.model.backbone.channels = 16;
  cfg.model.backbone.search_size = 191;
  cfg.anchors.ratios = {0.5, 1.0, 2.0};
  cfg.fusion.k_pen = 0.123456789012345;
  cfg.train.lr_scale = 1e-2;
  cfg.train.fixed_pairs = 32;
  cfg.synth.seed = 1234567890123ull;

  const std::string text = serialize_config(cfg);
  RunConfig back = parse_config_text(text);
  CHECK(back == cfg);
  CHECK(serialize_config(back) == text);

  // a second round trip is byte-stable
  CHECK(serialize_config(parse_config_text(serialize_config(back))) == text);
}

TEST_CASE("unknown keys and malformed lines are rejected with line numbers") {
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("nonsense.key = 3\n", "cfg")),
                       doctest::Contains("cfg:1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("seed = 1\nmodel.channels\n", "cfg")),
                       doctest::Contains("cfg:2"), std::runtime_error);
  CHECK_THROWS(static_cast<void>(parse_config_text("model.channels = banana\n", "cfg")));
  CHECK_THROWS(static_cast<void>(parse_config_text("anchors.ratios = \n", "cfg")));

  // comments and blank lines are fine, values override defaults
  RunConfig cfg = parse_config_text("# desk config\n\nmodel.channels = 24\nseed = 5\n");
  CHECK(cfg.model.backbone.channels == 24);
  CHECK(cfg.seed == 5);
  CHECK(cfg.model.k == 5);  // untouched default
}
