#include "siamman/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace siamman {

namespace {
Tensor conv_init(Rng& rng, std::vector<int> shape, double gain) {
  const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
  const double std = gain / std::sqrt(fan_in);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal() * std;
  return t;
}
}  // namespace

void register_attention_params(ParamStore& store, const std::string& branch, int in_channels,
                               const AttentionConfig& cfg, Rng& rng) {
  const int mid = cfg.mid_channels;
  const std::string base = "attn." + branch;
  store.add(base + ".conv1.w", conv_init(rng, {mid, in_channels, 3, 3}, std::sqrt(2.0)),
            ParamGroup::attention);
  store.add(base + ".conv1.b", Tensor({mid}), ParamGroup::attention);
  store.add(base + ".conv2.w", conv_init(rng, {mid, mid, 3, 3}, std::sqrt(2.0)),
            ParamGroup::attention);
  store.add(base + ".conv2.b", Tensor({mid}), ParamGroup::attention);
  // zero FC: gamma starts exactly uniform, matching the disabled-attention
  // phases it takes over from
  store.add(base + ".fc.w", Tensor({cfg.levels, mid}), ParamGroup::attention);
  store.add(base + ".fc.b", Tensor({cfg.levels}), ParamGroup::attention);
}

AttentionNodes attention_nodes(ParamLeaves& leaves, ParamStore& store, const std::string& branch,
                               bool sigmoid_weights) {
  const std::string base = "attn." + branch;
  AttentionNodes n;
  n.conv1_w = leaves(store.get(base + ".conv1.w"));
  n.conv1_b = leaves(store.get(base + ".conv1.b"));
  n.conv2_w = leaves(store.get(base + ".conv2.w"));
  n.conv2_b = leaves(store.get(base + ".conv2.b"));
  n.fc_w = leaves(store.get(base + ".fc.w"));
  n.fc_b = leaves(store.get(base + ".fc.b"));
  n.sigmoid_weights = sigmoid_weights;
  return n;
}

NodeRef attention_weights(Tape& t, const std::vector<NodeRef>& level_maps,
                          const AttentionNodes& p) {
  if (level_maps.empty()) throw std::invalid_argument("attention_weights: no level maps");
  for (const auto& m : level_maps)
    if (!m->value.same_shape(level_maps[0]->value))
      throw std::invalid_argument("attention_weights: level maps must share one shape");
  if (p.fc_w->value.dim(0) != static_cast<int>(level_maps.size()))
    throw std::invalid_argument("attention_weights: parameter logit count " +
                                std::to_string(p.fc_w->value.dim(0)) + " != level count " +
                                std::to_string(level_maps.size()));
  NodeRef x = ops::concat_channels(t, level_maps);
  x = ops::relu(t, ops::add_channel_vec(t, ops::conv2d(t, x, p.conv1_w, 2, 1, 1), p.conv1_b));
  x = ops::relu(t, ops::add_channel_vec(t, ops::conv2d(t, x, p.conv2_w, 2, 1, 1), p.conv2_b));
  NodeRef pooled = ops::global_avg_pool(t, x);
  NodeRef logits = ops::linear(t, pooled, p.fc_w, p.fc_b);
  return p.sigmoid_weights ? ops::sigmoid(t, logits) : ops::softmax(t, logits, 0);
}

}  // namespace siamman
