#pragma once

#include <array>
#include <vector>

#include "siamman/ops.hpp"
#include "siamman/params.hpp"
#include "siamman/rng.hpp"

namespace siamman {

struct HeadConfig {
  int channels = 32;
  int k = 5;           // anchors per cell
  int levels = 3;
  int gc_ratio = 4;    // bottleneck divisor of the global context block
  int aspp_rate_a = 2;
  int aspp_rate_b = 4;
};

// node handles for one branch level's 1x1 stack (C -> C -> out_channels)
struct ConvStackNodes {
  NodeRef w1, b1, w2, b2;
};

struct GcNodes {
  NodeRef attn_w;        // [1,C,1,1] attention logits
  NodeRef fc1_w, fc1_b;  // C -> C/ratio
  NodeRef fc2_w, fc2_b;  // C/ratio -> C, zero-initialized so GC starts as identity
};

struct AsppNodes {
  NodeRef d1_w, d1_b;      // 3x3 dilated, rate_a
  NodeRef d2_w, d2_b;      // 3x3 dilated, rate_b
  NodeRef proj_w, proj_b;  // 1x1, 2C -> 2
  int rate_a = 2, rate_b = 4;
};

struct HeadNodes {
  std::vector<ConvStackNodes> cls;  // per level
  std::vector<ConvStackNodes> reg;
  std::vector<GcNodes> gc;
  std::vector<AsppNodes> aspp;
};

void register_head_params(ParamStore& store, const HeadConfig& cfg, Rng& rng);
HeadNodes head_nodes(ParamLeaves& leaves, ParamStore& store, const HeadConfig& cfg);

// depth-wise correlation followed by the two-layer 1x1 stack
NodeRef cls_reg_level(Tape& t, NodeRef t_feat, NodeRef d_feat, const ConvStackNodes& p);

// E[template] resized to the detection grid, element-wise product
NodeRef loc_correlation(Tape& t, NodeRef t_feat, NodeRef d_feat);

// softmax-pooled context vector, bottleneck transform, residual broadcast add
NodeRef global_context(Tape& t, NodeRef x, const GcNodes& p);

// two parallel dilated 3x3 convs, channel concat, 1x1 projection to 2 maps
NodeRef aspp(Tape& t, NodeRef x, const AsppNodes& p);

// weighted per-level sum with plain (non-learned) weights
NodeRef fuse_levels_fixed(Tape& t, const std::vector<NodeRef>& maps,
                          const std::vector<double>& gamma);
// weighted per-level sum where gamma is a graph node of length L
NodeRef fuse_levels(Tape& t, const std::vector<NodeRef>& maps, NodeRef gamma);

struct BranchOutputsN {
  NodeRef cls;  // [2k,h,w]
  NodeRef reg;  // [4k,h,w]
  NodeRef loc;  // [2,h,w]
};

// per-branch per-level maps before fusion; the localization maps are
// produced at detection resolution and resized to the correlation grid so
// all three branches share h x w
struct LevelMaps {
  std::vector<NodeRef> cls, reg, loc;
};

struct BranchFeatures {
  // post-split features per level: [branch][level] with branch order cls,reg,loc
  std::array<std::vector<NodeRef>, 3> templ, det;
};

LevelMaps branch_level_maps(Tape& t, const BranchFeatures& f, const HeadNodes& p);

BranchOutputsN forward_heads(Tape& t, const LevelMaps& maps,
                             const std::array<std::vector<double>, 3>& gammas);

}  // namespace siamman
