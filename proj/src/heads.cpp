#include "siamman/heads.hpp"

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

Tensor fc_init(Rng& rng, std::vector<int> shape, double gain) {
  const double std = gain / std::sqrt(static_cast<double>(shape[1]));
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal() * std;
  return t;
}

// final prediction layers start near zero so logits begin at the softmax
// midpoint and deltas at the anchor
constexpr double kHeadOutGain = 0.01;
// the localization projection keeps a working gradient path into the
// dilated-conv trunk; near-zero init stalls that branch
constexpr double kLocProjGain = 0.3;
}  // namespace

void register_head_params(ParamStore& store, const HeadConfig& cfg, Rng& rng) {
  const int c = cfg.channels;
  if (c % cfg.gc_ratio != 0)
    throw std::invalid_argument("head config: channels not divisible by gc_ratio");
  const int cr = c / cfg.gc_ratio;
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string lv = std::to_string(i);
    store.add("heads.cls" + lv + ".w1", conv_init(rng, {c, c, 1, 1}, std::sqrt(2.0)),
              ParamGroup::cls_head);
    store.add("heads.cls" + lv + ".b1", Tensor({c}), ParamGroup::cls_head);
    store.add("heads.cls" + lv + ".w2", conv_init(rng, {2 * cfg.k, c, 1, 1}, kHeadOutGain),
              ParamGroup::cls_head);
    store.add("heads.cls" + lv + ".b2", Tensor({2 * cfg.k}), ParamGroup::cls_head);

    store.add("heads.reg" + lv + ".w1", conv_init(rng, {c, c, 1, 1}, std::sqrt(2.0)),
              ParamGroup::reg_head);
    store.add("heads.reg" + lv + ".b1", Tensor({c}), ParamGroup::reg_head);
    store.add("heads.reg" + lv + ".w2", conv_init(rng, {4 * cfg.k, c, 1, 1}, kHeadOutGain),
              ParamGroup::reg_head);
    store.add("heads.reg" + lv + ".b2", Tensor({4 * cfg.k}), ParamGroup::reg_head);

    store.add("heads.loc" + lv + ".gc.attn.w", conv_init(rng, {1, c, 1, 1}, 1.0),
              ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".gc.fc1.w", fc_init(rng, {cr, c}, 1.0), ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".gc.fc1.b", Tensor({cr}), ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".gc.fc2.w", Tensor({c, cr}), ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".gc.fc2.b", Tensor({c}), ParamGroup::loc_head);

    store.add("heads.loc" + lv + ".aspp.d1.w", conv_init(rng, {c, c, 3, 3}, 1.0),
              ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".aspp.d1.b", Tensor({c}), ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".aspp.d2.w", conv_init(rng, {c, c, 3, 3}, 1.0),
              ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".aspp.d2.b", Tensor({c}), ParamGroup::loc_head);
    store.add("heads.loc" + lv + ".aspp.proj.w", conv_init(rng, {2, 2 * c, 1, 1}, kLocProjGain),
              ParamGroup::loc_head);
    // bias starts at the center-map class prior (one peak cell per ~289),
    // so training begins at the flat optimum instead of burning steps
    // crushing logits down
    store.add("heads.loc" + lv + ".aspp.proj.b", Tensor::from({2}, {2.83, -2.83}),
              ParamGroup::loc_head);
  }
}

HeadNodes head_nodes(ParamLeaves& leaves, ParamStore& store, const HeadConfig& cfg) {
  HeadNodes n;
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string lv = std::to_string(i);
    n.cls.push_back({leaves(store.get("heads.cls" + lv + ".w1")),
                     leaves(store.get("heads.cls" + lv + ".b1")),
                     leaves(store.get("heads.cls" + lv + ".w2")),
                     leaves(store.get("heads.cls" + lv + ".b2"))});
    n.reg.push_back({leaves(store.get("heads.reg" + lv + ".w1")),
                     leaves(store.get("heads.reg" + lv + ".b1")),
                     leaves(store.get("heads.reg" + lv + ".w2")),
                     leaves(store.get("heads.reg" + lv + ".b2"))});
    n.gc.push_back({leaves(store.get("heads.loc" + lv + ".gc.attn.w")),
                    leaves(store.get("heads.loc" + lv + ".gc.fc1.w")),
                    leaves(store.get("heads.loc" + lv + ".gc.fc1.b")),
                    leaves(store.get("heads.loc" + lv + ".gc.fc2.w")),
                    leaves(store.get("heads.loc" + lv + ".gc.fc2.b"))});
    n.aspp.push_back({leaves(store.get("heads.loc" + lv + ".aspp.d1.w")),
                      leaves(store.get("heads.loc" + lv + ".aspp.d1.b")),
                      leaves(store.get("heads.loc" + lv + ".aspp.d2.w")),
                      leaves(store.get("heads.loc" + lv + ".aspp.d2.b")),
                      leaves(store.get("heads.loc" + lv + ".aspp.proj.w")),
                      leaves(store.get("heads.loc" + lv + ".aspp.proj.b")),
                      cfg.aspp_rate_a, cfg.aspp_rate_b});
  }
  return n;
}

NodeRef cls_reg_level(Tape& t, NodeRef t_feat, NodeRef d_feat, const ConvStackNodes& p) {
  NodeRef f = ops::xcorr_depthwise(t, d_feat, t_feat);
  f = ops::relu(t, ops::add_channel_vec(t, ops::conv2d(t, f, p.w1), p.b1));
  return ops::add_channel_vec(t, ops::conv2d(t, f, p.w2), p.b2);
}

NodeRef loc_correlation(Tape& t, NodeRef t_feat, NodeRef d_feat) {
  if (t_feat->value.dim(0) != d_feat->value.dim(0))
    throw std::invalid_argument("loc_correlation: channel mismatch");
  NodeRef resized = ops::resize_bilinear(t, t_feat, d_feat->value.dim(1), d_feat->value.dim(2));
  return ops::mul(t, resized, d_feat);
}

NodeRef global_context(Tape& t, NodeRef x, const GcNodes& p) {
  NodeRef logits = ops::conv2d(t, x, p.attn_w);
  NodeRef ctx = ops::gc_spatial_pool(t, x, logits);
  NodeRef h = ops::linear(t, ctx, p.fc1_w, p.fc1_b);
  h = ops::relu(t, ops::layer_norm(t, h));
  NodeRef transform = ops::linear(t, h, p.fc2_w, p.fc2_b);
  return ops::add_channel_vec(t, x, transform);
}

NodeRef aspp(Tape& t, NodeRef x, const AsppNodes& p) {
  // same padding equals the dilation rate for 3x3 kernels; each dilated
  // branch is rectified before the concat, otherwise the pyramid collapses
  // into a single linear filter
  NodeRef y1 = ops::relu(
      t, ops::add_channel_vec(t, ops::conv2d(t, x, p.d1_w, 1, p.rate_a, p.rate_a), p.d1_b));
  NodeRef y2 = ops::relu(
      t, ops::add_channel_vec(t, ops::conv2d(t, x, p.d2_w, 1, p.rate_b, p.rate_b), p.d2_b));
  NodeRef cat = ops::concat_channels(t, {y1, y2});
  return ops::add_channel_vec(t, ops::conv2d(t, cat, p.proj_w), p.proj_b);
}

NodeRef fuse_levels_fixed(Tape& t, const std::vector<NodeRef>& maps,
                          const std::vector<double>& gamma) {
  if (maps.empty() || maps.size() != gamma.size())
    throw std::invalid_argument("fuse_levels: gamma length does not match level count");
  NodeRef acc = ops::scale(t, maps[0], gamma[0]);
  for (std::size_t m = 1; m < maps.size(); ++m)
    acc = ops::add(t, acc, ops::scale(t, maps[m], gamma[m]));
  return acc;
}

NodeRef fuse_levels(Tape& t, const std::vector<NodeRef>& maps, NodeRef gamma) {
  if (maps.empty() || gamma->value.dim(0) != static_cast<int>(maps.size()))
    throw std::invalid_argument("fuse_levels: gamma length does not match level count");
  NodeRef acc = ops::scale_by_entry(t, maps[0], gamma, 0);
  for (std::size_t m = 1; m < maps.size(); ++m)
    acc = ops::add(t, acc, ops::scale_by_entry(t, maps[m], gamma, static_cast<int>(m)));
  return acc;
}

LevelMaps branch_level_maps(Tape& t, const BranchFeatures& f, const HeadNodes& p) {
  const std::size_t levels = f.templ[0].size();
  LevelMaps maps;
  int corr_h = 0, corr_w = 0;
  for (std::size_t m = 0; m < levels; ++m) {
    NodeRef c = cls_reg_level(t, f.templ[0][m], f.det[0][m], p.cls[m]);
    corr_h = c->value.dim(1);
    corr_w = c->value.dim(2);
    maps.cls.push_back(c);
    maps.reg.push_back(cls_reg_level(t, f.templ[1][m], f.det[1][m], p.reg[m]));
  }
  for (std::size_t m = 0; m < levels; ++m) {
    NodeRef l = loc_correlation(t, f.templ[2][m], f.det[2][m]);
    l = global_context(t, l, p.gc[m]);
    l = aspp(t, l, p.aspp[m]);
    // the correlation grid is the center of the detection grid (a valid 7x7
    // correlation trims 3 cells per side), so the center crop aligns the
    // localization map with the other two branches cell-for-cell
    maps.loc.push_back(ops::crop_center(t, l, corr_h, corr_w));
  }
  return maps;
}

BranchOutputsN forward_heads(Tape& t, const LevelMaps& maps,
                             const std::array<std::vector<double>, 3>& gammas) {
  BranchOutputsN out;
  out.cls = fuse_levels_fixed(t, maps.cls, gammas[0]);
  out.reg = fuse_levels_fixed(t, maps.reg, gammas[1]);
  out.loc = fuse_levels_fixed(t, maps.loc, gammas[2]);
  return out;
}

}  // namespace siamman
