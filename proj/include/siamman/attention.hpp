#pragma once

#include <vector>

#include "siamman/ops.hpp"
#include "siamman/params.hpp"
#include "siamman/rng.hpp"

namespace siamman {

struct AttentionConfig {
  int mid_channels = 16;  // width of the two stride-2 convs
  int levels = 3;
  // ablation switch: raw sigmoid weights instead of the softmax-normalized
  // convex combination
  bool sigmoid_weights = false;
};

struct AttentionNodes {
  NodeRef conv1_w, conv1_b;
  NodeRef conv2_w, conv2_b;
  NodeRef fc_w, fc_b;  // pooled vector -> L logits
  bool sigmoid_weights = false;
};

// one independent instance per branch; `branch` is "cls", "reg" or "loc"
void register_attention_params(ParamStore& store, const std::string& branch, int in_channels,
                               const AttentionConfig& cfg, Rng& rng);
AttentionNodes attention_nodes(ParamLeaves& leaves, ParamStore& store, const std::string& branch,
                               bool sigmoid_weights);

// Channel-concat of the per-level maps, two 3x3 stride-2 same-padding convs,
// global average pooling, a fully connected layer to L logits, softmax.
// Returns gamma as a length-L node: strictly positive and summing to 1.
NodeRef attention_weights(Tape& t, const std::vector<NodeRef>& level_maps,
                          const AttentionNodes& p);

}  // namespace siamman
