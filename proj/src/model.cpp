#include "siamman/model.hpp"

#include <stdexcept>

namespace siamman {

SiamMan::SiamMan(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  Rng rng(init_seed);
  register_backbone_params(store_, cfg_.backbone, rng);
  register_head_params(store_, cfg_.head(), rng);
  const int c = cfg_.backbone.channels;
  const int lv = cfg_.backbone.levels;
  register_attention_params(store_, "cls", lv * 2 * cfg_.k, cfg_.attention(), rng);
  register_attention_params(store_, "reg", lv * 4 * cfg_.k, cfg_.attention(), rng);
  register_attention_params(store_, "loc", lv * 2, cfg_.attention(), rng);
  (void)c;
}

ModelForward SiamMan::forward(Tape& t, const Tensor& templ_patch, const Tensor& search_patch,
                              bool use_attention) {
  return forward_impl(t, nullptr, &templ_patch, search_patch, use_attention);
}

TemplateCache SiamMan::encode_template(const Tensor& templ_patch) {
  // run the template side once and keep the post-split features
  Tape t;
  ParamLeaves leaves(t);
  BackboneNodes bb = backbone_nodes(leaves, store_, cfg_.backbone);

  auto trunk = [&](NodeRef x) {
    for (int i = 0; i < 3; ++i) {
      x = ops::relu(t, ops::add_channel_vec(
                           t, ops::conv2d(t, x, bb.trunk_w[static_cast<std::size_t>(i)], 2, 1, 0),
                           bb.trunk_b[static_cast<std::size_t>(i)]));
    }
    return x;
  };
  if (templ_patch.dim(1) != cfg_.backbone.exemplar_size)
    throw std::invalid_argument("encode_template: patch does not match exemplar size");
  NodeRef tz = trunk(t.leaf(templ_patch));
  TemplateCache cache;
  for (int i = 0; i < cfg_.backbone.levels; ++i) {
    const std::size_t li = static_cast<std::size_t>(i);
    NodeRef f = ops::relu(
        t, ops::add_channel_vec(t, ops::conv2d(t, tz, bb.tap_w[li], 1, 1, 1), bb.tap_b[li]));
    f = ops::add_channel_vec(t, ops::conv2d(t, f, bb.reduce_w[li]), bb.reduce_b[li]);
    f = ops::crop_center(t, f, 7, 7);
    auto split = branch_split(t, f, bb.split_w[li]);
    for (int br = 0; br < 3; ++br)
      cache.feats[static_cast<std::size_t>(br)].push_back(split[static_cast<std::size_t>(br)]->value);
  }
  return cache;
}

ModelForward SiamMan::forward_with_template(Tape& t, const TemplateCache& cache,
                                            const Tensor& search_patch, bool use_attention) {
  return forward_impl(t, &cache, nullptr, search_patch, use_attention);
}

ModelForward SiamMan::forward_impl(Tape& t, const TemplateCache* cache, const Tensor* templ_patch,
                                   const Tensor& search_patch, bool use_attention) {
  ParamLeaves leaves(t);
  BackboneNodes bb = backbone_nodes(leaves, store_, cfg_.backbone);
  HeadNodes hd = head_nodes(leaves, store_, cfg_.head());

  NodeRef det_leaf = t.leaf(search_patch);
  BranchFeatures feats;

  if (cache) {
    // template side fixed; only the detection path is recomputed
    auto trunk = [&](NodeRef x) {
      for (int i = 0; i < 3; ++i)
        x = ops::relu(t, ops::add_channel_vec(
                             t, ops::conv2d(t, x, bb.trunk_w[static_cast<std::size_t>(i)], 2, 1, 0),
                             bb.trunk_b[static_cast<std::size_t>(i)]));
      return x;
    };
    if (search_patch.dim(1) != cfg_.backbone.search_size)
      throw std::invalid_argument("forward: patch does not match search size");
    NodeRef dz = trunk(det_leaf);
    for (int i = 0; i < cfg_.backbone.levels; ++i) {
      const std::size_t li = static_cast<std::size_t>(i);
      NodeRef f = ops::relu(
          t, ops::add_channel_vec(t, ops::conv2d(t, dz, bb.tap_w[li], 1, 1, 1), bb.tap_b[li]));
      f = ops::add_channel_vec(t, ops::conv2d(t, f, bb.reduce_w[li]), bb.reduce_b[li]);
      auto split = branch_split(t, f, bb.split_w[li]);
      for (int br = 0; br < 3; ++br) {
        const std::size_t bi = static_cast<std::size_t>(br);
        feats.templ[bi].push_back(t.leaf(cache->feats[bi][li]));
        feats.det[bi].push_back(split[bi]);
      }
    }
  } else {
    auto pyr = extract_pyramid(t, t.leaf(*templ_patch), det_leaf, cfg_.backbone, bb);
    for (int i = 0; i < cfg_.backbone.levels; ++i) {
      const std::size_t li = static_cast<std::size_t>(i);
      auto ts = branch_split(t, pyr[li].templ, bb.split_w[li]);
      auto ds = branch_split(t, pyr[li].det, bb.split_w[li]);
      for (int br = 0; br < 3; ++br) {
        const std::size_t bi = static_cast<std::size_t>(br);
        feats.templ[bi].push_back(ts[bi]);
        feats.det[bi].push_back(ds[bi]);
      }
    }
  }

  LevelMaps maps = branch_level_maps(t, feats, hd);
  const int levels = cfg_.backbone.levels;

  ModelForward fw;
  if (!use_attention) {
    // disabled attention is exactly the uniform convex combination
    std::vector<double> uniform(static_cast<std::size_t>(levels), 1.0 / levels);
    fw.gammas = {uniform, uniform, uniform};
    fw.out = forward_heads(t, maps, fw.gammas);
    fw.param_leaves = leaves.map();
    return fw;
  }

  const char* branch_names[3] = {"cls", "reg", "loc"};
  const std::vector<NodeRef>* branch_maps[3] = {&maps.cls, &maps.reg, &maps.loc};
  std::array<NodeRef, 3> fused;
  for (int br = 0; br < 3; ++br) {
    const std::size_t bi = static_cast<std::size_t>(br);
    AttentionNodes an = attention_nodes(leaves, store_, branch_names[bi], cfg_.sigmoid_attention);
    NodeRef gamma = attention_weights(t, *branch_maps[bi], an);
    fw.gamma_nodes[bi] = gamma;
    fw.gammas[bi] = gamma->value.data;
    fused[bi] = fuse_levels(t, *branch_maps[bi], gamma);
  }
  fw.out = {fused[0], fused[1], fused[2]};
  fw.param_leaves = leaves.map();
  return fw;
}

}  // namespace siamman
