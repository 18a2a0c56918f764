#pragma once

#include "siamman/anchors.hpp"
#include "siamman/autograd.hpp"

namespace siamman {

// Gaussian center target on the response-map lattice. gt is given in
// patch-center-relative pixels like the anchors. Peak value is exactly 1 at
// the nearest lattice cell; sigma = radius/3 where radius is the largest
// center shift (in cells, floored at 1) keeping IoU with the unshifted box
// at least 0.7.
Tensor gaussian_center_map(const Box& gt, int map_w, int map_h, int stride);

// size-adaptive radius in pixels for the given box and overlap level
double gaussian_radius(double w, double h, double min_iou = 0.7);

struct LossWeights {
  double cls = 1.0;
  double reg = 1.0;
  double loc = 1.0;
};

// Cross-entropy over softmaxed (background, foreground) channel pairs,
// summed over positive and negative anchors with the -1/2 factor; ignore
// anchors are excluded. Channel layout: 2m = background, 2m+1 = foreground
// logit of anchor m. Logs are clipped at eps = 1e-7.
NodeRef loss_cls(Tape& t, NodeRef o_cls, const MatchLabels& labels);

// Mean over positive anchors of the L1 distance between the predicted delta
// 4-vector (channels [4m..4m+3]) and the encoded target; 0 when there are no
// positives.
NodeRef loss_reg(Tape& t, NodeRef o_reg, const MatchLabels& labels);

// Same cross-entropy form on the 2-channel center map against soft targets.
NodeRef loss_loc(Tape& t, NodeRef o_loc, const Tensor& center_target);

struct LossBreakdown {
  NodeRef total, cls, reg, loc;
  LossWeights lambdas;
};

// Weighted sum of the three terms; negative pairs mask the regression and
// localization terms to exact zero (classification-only supervision).
LossBreakdown loss_total(Tape& t, NodeRef o_cls, NodeRef o_reg, NodeRef o_loc,
                         const MatchLabels& labels, const Tensor& center_target,
                         const LossWeights& lw, bool positive_pair);

}  // namespace siamman
