#pragma once

#include <array>
#include <string>
#include <vector>

#include "siamman/attention.hpp"
#include "siamman/backbone.hpp"
#include "siamman/heads.hpp"

namespace siamman {

struct ModelConfig {
  BackboneConfig backbone;
  int k = 5;
  int gc_ratio = 4;
  int aspp_rate_a = 2;
  int aspp_rate_b = 4;
  int attn_channels = 16;
  bool sigmoid_attention = false;

  HeadConfig head() const {
    return {backbone.channels, k, backbone.levels, gc_ratio, aspp_rate_a, aspp_rate_b};
  }
  AttentionConfig attention() const {
    return {attn_channels, backbone.levels, sigmoid_attention};
  }
  // response-map side for the configured search size
  int map_size() const { return stride_chain_out(backbone.search_size) - 7 + 1; }
};

// template-side features cached at track start: post-split [branch][level]
struct TemplateCache {
  std::array<std::vector<Tensor>, 3> feats;
};

struct ModelForward {
  BranchOutputsN out;
  // gamma actually used per branch (uniform when attention is disabled)
  std::array<std::vector<double>, 3> gammas;
  // gamma nodes when attention is enabled (empty otherwise)
  std::array<NodeRef, 3> gamma_nodes;
  // leaf node per parameter, for reading gradients after backward
  std::unordered_map<const Param*, NodeRef> param_leaves;
};

// The full network: siamese backbone, branch splits, three heads, per-branch
// multi-scale attention. Owns the parameter store; forward passes build a
// fresh graph on the caller's tape.
class SiamMan {
 public:
  SiamMan(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  ModelForward forward(Tape& t, const Tensor& templ_patch, const Tensor& search_patch,
                       bool use_attention);

  TemplateCache encode_template(const Tensor& templ_patch);
  ModelForward forward_with_template(Tape& t, const TemplateCache& cache,
                                     const Tensor& search_patch, bool use_attention);

 private:
  ModelForward forward_impl(Tape& t, const TemplateCache* cache, const Tensor* templ_patch,
                            const Tensor& search_patch, bool use_attention);

  ModelConfig cfg_;
  ParamStore store_;
};

}  // namespace siamman
