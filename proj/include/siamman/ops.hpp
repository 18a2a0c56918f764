#pragma once

#include <vector>

#include "siamman/autograd.hpp"
#include "siamman/kernels.hpp"

// Differentiable ops. Each records a backward closure on the tape; heavy
// lifting goes through the kernels layer, everything else is implemented
// inline. All ops validate shapes and (in checked mode) finiteness.
namespace siamman::ops {

NodeRef conv2d(Tape& t, NodeRef input, NodeRef kernel, int stride = 1, int dilation = 1,
               int padding = 0);
NodeRef xcorr_depthwise(Tape& t, NodeRef detection, NodeRef templ);
NodeRef softmax(Tape& t, NodeRef x, int axis);
NodeRef resize_bilinear(Tape& t, NodeRef x, int new_h, int new_w);
NodeRef global_avg_pool(Tape& t, NodeRef x);
NodeRef linear(Tape& t, NodeRef v, NodeRef weight, NodeRef bias);
NodeRef relu(Tape& t, NodeRef x);
NodeRef add(Tape& t, NodeRef a, NodeRef b);
NodeRef mul(Tape& t, NodeRef a, NodeRef b);
NodeRef scale(Tape& t, NodeRef x, double c);
// x[C,H,W] + v[C] broadcast over the spatial grid (conv bias, context fusion)
NodeRef add_channel_vec(Tape& t, NodeRef x, NodeRef v);
NodeRef concat_channels(Tape& t, const std::vector<NodeRef>& xs);
NodeRef crop_center(Tape& t, NodeRef x, int out_h, int out_w);
// softmax-weighted spatial pooling: x[C,H,W] with logits[1,H,W] -> [C]
NodeRef gc_spatial_pool(Tape& t, NodeRef x, NodeRef logits);
NodeRef layer_norm(Tape& t, NodeRef v, double eps = 1e-5);
// x * gamma[index] where gamma is a vector node; gradient reaches gamma
NodeRef scale_by_entry(Tape& t, NodeRef x, NodeRef gamma, int index);
NodeRef sum_all(Tape& t, NodeRef x);
NodeRef sigmoid(Tape& t, NodeRef x);

// tensor-level (non-recorded) softmax used by the inference path
Tensor softmax_tensor(const Tensor& x, int axis);

}  // namespace siamman::ops
