#include "siamman/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "siamman/attention.hpp"
#include "siamman/heads.hpp"
#include "siamman/losses.hpp"
#include "siamman/ops.hpp"
#include "siamman/rng.hpp"

namespace siamman {

namespace {

Tensor rand_t(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

struct Check {
  std::string name;
  // builds (inputs, closure) for one seed
  std::function<std::pair<std::vector<Tensor>, ScalarClosure>(std::uint64_t)> build;
};

NodeRef sq_sum(Tape& t, NodeRef x) { return ops::sum_all(t, ops::mul(t, x, x)); }

std::vector<Check> make_checks() {
  std::vector<Check> cs;

  cs.push_back({"conv2d", [](std::uint64_t seed) {
    Rng rng(seed * 101 + 3);
    std::vector<Tensor> in = {rand_t({2, 5, 5}, rng), rand_t({3, 2, 3, 3}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      return sq_sum(t, ops::conv2d(t, x[0], x[1], 1, 2, 2));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"xcorr_depthwise", [](std::uint64_t seed) {
    Rng rng(seed * 103 + 5);
    std::vector<Tensor> in = {rand_t({3, 6, 6}, rng), rand_t({3, 3, 3}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      return sq_sum(t, ops::xcorr_depthwise(t, x[0], x[1]));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"softmax", [](std::uint64_t seed) {
    Rng rng(seed * 107 + 7);
    std::vector<Tensor> in = {rand_t({2, 4, 3}, rng, 2.0)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      auto s = ops::softmax(t, x[0], 0);
      return sq_sum(t, s);
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"resize_bilinear", [](std::uint64_t seed) {
    Rng rng(seed * 109 + 11);
    std::vector<Tensor> in = {rand_t({2, 3, 4}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      return sq_sum(t, ops::resize_bilinear(t, x[0], 6, 5));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"global_avg_pool", [](std::uint64_t seed) {
    Rng rng(seed * 113 + 13);
    std::vector<Tensor> in = {rand_t({3, 4, 4}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      return sq_sum(t, ops::global_avg_pool(t, x[0]));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"linear", [](std::uint64_t seed) {
    Rng rng(seed * 127 + 17);
    std::vector<Tensor> in = {rand_t({4}, rng), rand_t({3, 4}, rng), rand_t({3}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      return sq_sum(t, ops::linear(t, x[0], x[1], x[2]));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"gc_spatial_pool", [](std::uint64_t seed) {
    Rng rng(seed * 131 + 19);
    std::vector<Tensor> in = {rand_t({3, 3, 3}, rng), rand_t({1, 3, 3}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      return sq_sum(t, ops::gc_spatial_pool(t, x[0], x[1]));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"layer_norm", [](std::uint64_t seed) {
    Rng rng(seed * 137 + 23);
    std::vector<Tensor> in = {rand_t({6}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      auto y = ops::layer_norm(t, x[0]);
      return ops::sum_all(t, ops::mul(t, y, ops::mul(t, y, y)));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"cls_level", [](std::uint64_t seed) {
    Rng rng(seed * 139 + 29);
    const int c = 4, k = 2;
    std::vector<Tensor> in = {rand_t({c, 3, 3}, rng), rand_t({c, 5, 5}, rng),
                              rand_t({c, c, 1, 1}, rng), rand_t({c}, rng),
                              rand_t({2 * k, c, 1, 1}, rng), rand_t({2 * k}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      ConvStackNodes p{x[2], x[3], x[4], x[5]};
      return sq_sum(t, cls_reg_level(t, x[0], x[1], p));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"reg_level", [](std::uint64_t seed) {
    Rng rng(seed * 149 + 31);
    const int c = 4, k = 2;
    std::vector<Tensor> in = {rand_t({c, 3, 3}, rng), rand_t({c, 5, 5}, rng),
                              rand_t({c, c, 1, 1}, rng), rand_t({c}, rng),
                              rand_t({4 * k, c, 1, 1}, rng), rand_t({4 * k}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      ConvStackNodes p{x[2], x[3], x[4], x[5]};
      return sq_sum(t, cls_reg_level(t, x[0], x[1], p));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"loc_pipeline", [](std::uint64_t seed) {
    Rng rng(seed * 151 + 37);
    const int c = 4, cr = 2;
    std::vector<Tensor> in = {
        rand_t({c, 3, 3}, rng),       // template feature
        rand_t({c, 5, 5}, rng),       // detection feature
        rand_t({1, c, 1, 1}, rng),    // gc attention conv
        rand_t({cr, c}, rng),         // gc fc1
        rand_t({cr}, rng),
        rand_t({c, cr}, rng, 0.3),    // gc fc2 (nonzero so the path is exercised)
        rand_t({c}, rng, 0.3),
        rand_t({c, c, 3, 3}, rng),    // aspp d1
        rand_t({c}, rng),
        rand_t({c, c, 3, 3}, rng),    // aspp d2
        rand_t({c}, rng),
        rand_t({2, 2 * c, 1, 1}, rng),  // aspp proj
        rand_t({2}, rng),
    };
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      GcNodes gc{x[2], x[3], x[4], x[5], x[6]};
      AsppNodes ap{x[7], x[8], x[9], x[10], x[11], x[12], 2, 4};
      NodeRef lc = loc_correlation(t, x[0], x[1]);
      NodeRef g = global_context(t, lc, gc);
      NodeRef out = aspp(t, g, ap);
      return sq_sum(t, ops::crop_center(t, out, 3, 3));
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"attention_weights", [](std::uint64_t seed) {
    Rng rng(seed * 157 + 41);
    const int cb = 3, mid = 4, levels = 2;
    std::vector<Tensor> in = {
        rand_t({cb, 6, 6}, rng), rand_t({cb, 6, 6}, rng),          // level maps
        rand_t({mid, levels * cb, 3, 3}, rng), rand_t({mid}, rng),  // conv1
        rand_t({mid, mid, 3, 3}, rng), rand_t({mid}, rng),          // conv2
        rand_t({levels, mid}, rng), rand_t({levels}, rng),          // fc
    };
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      AttentionNodes p{x[2], x[3], x[4], x[5], x[6], x[7], false};
      NodeRef gamma = attention_weights(t, {x[0], x[1]}, p);
      // compose with the fusion it feeds
      NodeRef fused = fuse_levels(t, {x[0], x[1]}, gamma);
      return sq_sum(t, fused);
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"loss_cls", [](std::uint64_t seed) {
    Rng rng(seed * 163 + 43);
    AnchorConfig acfg{8, {0.5, 1.0}, 4};
    AnchorSet set = generate_anchors(3, 3, acfg);
    Box gt = set.at(1, 1, 1);
    gt.cx += 3;
    MatchLabels labels = match_anchors(set, gt, acfg);
    std::vector<Tensor> in = {rand_t({2 * set.k, 3, 3}, rng)};
    ScalarClosure f = [labels](Tape& t, const std::vector<NodeRef>& x) {
      return loss_cls(t, x[0], labels);
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"loss_reg", [](std::uint64_t seed) {
    Rng rng(seed * 167 + 47);
    AnchorConfig acfg{8, {0.5, 1.0}, 4};
    AnchorSet set = generate_anchors(3, 3, acfg);
    Box gt = set.at(1, 1, 1);
    gt.cy -= 2;
    MatchLabels labels = match_anchors(set, gt, acfg);
    std::vector<Tensor> in = {rand_t({4 * set.k, 3, 3}, rng)};
    ScalarClosure f = [labels](Tape& t, const std::vector<NodeRef>& x) {
      return loss_reg(t, x[0], labels);
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"loss_loc", [](std::uint64_t seed) {
    Rng rng(seed * 173 + 53);
    Tensor target = gaussian_center_map(Box{0, 0, 40, 40}, 5, 5, 8);
    std::vector<Tensor> in = {rand_t({2, 5, 5}, rng)};
    ScalarClosure f = [target](Tape& t, const std::vector<NodeRef>& x) {
      return loss_loc(t, x[0], target);
    };
    return std::make_pair(in, f);
  }});

  cs.push_back({"fusion", [](std::uint64_t seed) {
    Rng rng(seed * 179 + 59);
    std::vector<Tensor> in = {rand_t({2, 3, 3}, rng), rand_t({2, 3, 3}, rng),
                              rand_t({2, 3, 3}, rng), rand_t({3}, rng)};
    ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
      NodeRef gamma = ops::softmax(t, x[3], 0);
      return sq_sum(t, fuse_levels(t, {x[0], x[1], x[2]}, gamma));
    };
    return std::make_pair(in, f);
  }});

  return cs;
}

}  // namespace

std::vector<GradCheckResult> run_grad_suite(const std::string& filter, int seeds,
                                            bool inject_fault) {
  std::vector<Check> checks = make_checks();
  if (inject_fault) {
    checks.push_back({"fault_fixture", [](std::uint64_t seed) {
      Rng rng(seed * 191 + 61);
      std::vector<Tensor> in = {rand_t({4}, rng)};
      ScalarClosure f = [](Tape& t, const std::vector<NodeRef>& x) {
        // deliberately wrong backward: sign flipped
        NodeRef bad = t.record(x[0]->value, [x0 = x[0]](const Tensor& g) {
          Tensor gx = g;
          for (auto& v : gx.data) v = -v;
          accumulate_grad(*x0, gx);
        });
        return sq_sum(t, bad);
      };
      return std::make_pair(in, f);
    }});
  }

  std::vector<GradCheckResult> results;
  for (const auto& c : checks) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    GradCheckResult r;
    r.name = c.name;
    r.seeds = seeds;
    for (int s = 1; s <= seeds; ++s) {
      auto [inputs, closure] = c.build(static_cast<std::uint64_t>(s));
      r.max_err = std::max(r.max_err, grad_check(closure, inputs));
    }
    r.pass = r.max_err < r.tol;
    results.push_back(std::move(r));
  }
  if (results.empty()) throw std::invalid_argument("grad suite: filter '" + filter +
                                                   "' matches no checks");
  return results;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace siamman
