#include "siamman/backbone.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace siamman {

namespace {
Tensor conv_init(Rng& rng, std::vector<int> shape, double gain) {
  const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
  const double std = gain / std::sqrt(fan_in);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal() * std;
  return t;
}

NodeRef conv_block(Tape& t, NodeRef x, NodeRef w, NodeRef b, int stride, int padding) {
  return ops::relu(t, ops::add_channel_vec(t, ops::conv2d(t, x, w, stride, 1, padding), b));
}
}  // namespace

int stride_chain_out(int in) {
  for (int i = 0; i < 3; ++i) in = (in - 3) / 2 + 1;
  return in;
}

void validate_backbone_config(const BackboneConfig& cfg) {
  if (cfg.channels < 1 || cfg.levels < 1)
    throw std::invalid_argument("backbone config: channels and levels must be positive");
  // equality is allowed for the degenerate self-test configuration
  if (cfg.exemplar_size > cfg.search_size)
    throw std::invalid_argument("backbone config: exemplar_size must not exceed search_size");
  if (stride_chain_out(cfg.exemplar_size) != 15)
    throw std::invalid_argument("backbone config: exemplar_size " +
                                std::to_string(cfg.exemplar_size) +
                                " does not map to the 15x15 pre-crop template");
  if (stride_chain_out(cfg.search_size) < 15)
    throw std::invalid_argument("backbone config: search_size too small for the stride chain");
}

void register_backbone_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng) {
  validate_backbone_config(cfg);
  const int c = cfg.channels;
  const double relu_gain = std::sqrt(2.0);
  store.add("backbone.trunk1.w", conv_init(rng, {c, 3, 3, 3}, relu_gain), ParamGroup::backbone);
  store.add("backbone.trunk1.b", Tensor({c}), ParamGroup::backbone);
  store.add("backbone.trunk2.w", conv_init(rng, {c, c, 3, 3}, relu_gain), ParamGroup::backbone);
  store.add("backbone.trunk2.b", Tensor({c}), ParamGroup::backbone);
  store.add("backbone.trunk3.w", conv_init(rng, {c, c, 3, 3}, relu_gain), ParamGroup::backbone);
  store.add("backbone.trunk3.b", Tensor({c}), ParamGroup::backbone);
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string lv = std::to_string(i);
    store.add("backbone.tap" + lv + ".w", conv_init(rng, {c, c, 3, 3}, relu_gain),
              ParamGroup::backbone);
    store.add("backbone.tap" + lv + ".b", Tensor({c}), ParamGroup::backbone);
    store.add("backbone.reduce" + lv + ".w", conv_init(rng, {c, c, 1, 1}, 1.0),
              ParamGroup::backbone);
    store.add("backbone.reduce" + lv + ".b", Tensor({c}), ParamGroup::backbone);
    for (const char* br : {"cls", "reg", "loc"})
      store.add("backbone.split." + std::string(br) + lv + ".w",
                conv_init(rng, {c, c, 3, 3}, 1.0), ParamGroup::backbone);
  }
}

BackboneNodes backbone_nodes(ParamLeaves& leaves, ParamStore& store, const BackboneConfig& cfg) {
  BackboneNodes n;
  for (int i = 0; i < 3; ++i) {
    const std::string t = "backbone.trunk" + std::to_string(i + 1);
    n.trunk_w[static_cast<std::size_t>(i)] = leaves(store.get(t + ".w"));
    n.trunk_b[static_cast<std::size_t>(i)] = leaves(store.get(t + ".b"));
  }
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string lv = std::to_string(i);
    n.tap_w.push_back(leaves(store.get("backbone.tap" + lv + ".w")));
    n.tap_b.push_back(leaves(store.get("backbone.tap" + lv + ".b")));
    n.reduce_w.push_back(leaves(store.get("backbone.reduce" + lv + ".w")));
    n.reduce_b.push_back(leaves(store.get("backbone.reduce" + lv + ".b")));
    n.split_w.push_back({leaves(store.get("backbone.split.cls" + lv + ".w")),
                         leaves(store.get("backbone.split.reg" + lv + ".w")),
                         leaves(store.get("backbone.split.loc" + lv + ".w"))});
  }
  return n;
}

std::vector<PyramidLevel> extract_pyramid(Tape& t, NodeRef templ_patch, NodeRef det_patch,
                                          const BackboneConfig& cfg, const BackboneNodes& p) {
  validate_backbone_config(cfg);
  auto check_patch = [&](const NodeRef& x, int side, const char* which) {
    if (x->value.rank() != 3 || x->value.dim(0) != 3 || x->value.dim(1) != side ||
        x->value.dim(2) != side)
      throw std::invalid_argument(std::string("extract_pyramid: ") + which + " patch shape " +
                                  shape_str(x->value.shape) + " does not match config");
  };
  check_patch(templ_patch, cfg.exemplar_size, "template");
  check_patch(det_patch, cfg.search_size, "detection");

  auto trunk = [&](NodeRef x) {
    for (int i = 0; i < 3; ++i)
      x = conv_block(t, x, p.trunk_w[static_cast<std::size_t>(i)],
                     p.trunk_b[static_cast<std::size_t>(i)], 2, 0);
    return x;
  };
  NodeRef tz = trunk(templ_patch);
  NodeRef dz = trunk(det_patch);

  std::vector<PyramidLevel> out;
  for (int i = 0; i < cfg.levels; ++i) {
    const std::size_t li = static_cast<std::size_t>(i);
    auto tap = [&](NodeRef x) {
      NodeRef f = conv_block(t, x, p.tap_w[li], p.tap_b[li], 1, 1);
      return ops::add_channel_vec(t, ops::conv2d(t, f, p.reduce_w[li]), p.reduce_b[li]);
    };
    PyramidLevel lvl;
    lvl.templ = ops::crop_center(t, tap(tz), 7, 7);
    lvl.det = tap(dz);
    out.push_back(lvl);
  }
  return out;
}

std::array<NodeRef, 3> branch_split(Tape& t, NodeRef feat, const std::array<NodeRef, 3>& split_w) {
  return {ops::conv2d(t, feat, split_w[0], 1, 1, 1), ops::conv2d(t, feat, split_w[1], 1, 1, 1),
          ops::conv2d(t, feat, split_w[2], 1, 1, 1)};
}

}  // namespace siamman
