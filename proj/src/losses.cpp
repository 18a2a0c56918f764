#include "siamman/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "siamman/ops.hpp"

namespace siamman {

namespace {
constexpr double kLogEps = 1e-7;

// contribution and logit-gradients of one softmaxed (bg,fg) pair with soft
// target u* in [0,1]; logs clipped at kLogEps
struct CellLoss {
  double loss, d_neg, d_pos;
};

CellLoss cell_cross_entropy(double z_neg, double z_pos, double target) {
  const double m = std::max(z_neg, z_pos);
  const double en = std::exp(z_neg - m);
  const double ep = std::exp(z_pos - m);
  const double u = ep / (en + ep);  // foreground probability
  const double lu = std::log(std::max(u, kLogEps));
  const double lnu = std::log(std::max(1.0 - u, kLogEps));
  CellLoss out;
  out.loss = -0.5 * (target * lu + (1.0 - target) * lnu);
  // clipped branches contribute zero slope
  double dl_du = 0.0;
  if (u > kLogEps) dl_du += -0.5 * target / u;
  if (1.0 - u > kLogEps) dl_du += 0.5 * (1.0 - target) / (1.0 - u);
  const double du_dzpos = u * (1.0 - u);
  out.d_pos = dl_du * du_dzpos;
  out.d_neg = -out.d_pos;
  return out;
}
}  // namespace

double gaussian_radius(double w, double h, double min_iou) {
  // largest r with (w-r)(h-r) >= c*w*h, c = 2*min_iou/(1+min_iou); this keeps
  // IoU of the box shifted diagonally by r at or above min_iou
  const double c = 2.0 * min_iou / (1.0 + min_iou);
  const double s = w + h;
  const double disc = s * s - 4.0 * (1.0 - c) * w * h;
  return (s - std::sqrt(std::max(disc, 0.0))) / 2.0;
}

Tensor gaussian_center_map(const Box& gt, int map_w, int map_h, int stride) {
  if (gt.w <= 0 || gt.h <= 0) throw std::invalid_argument("gaussian_center_map: degenerate gt");
  const double ox = (map_w - 1) / 2.0;
  const double oy = (map_h - 1) / 2.0;
  const int i0 = static_cast<int>(std::lround(gt.cx / stride + ox));
  const int j0 = static_cast<int>(std::lround(gt.cy / stride + oy));
  if (i0 < 0 || i0 >= map_w || j0 < 0 || j0 >= map_h)
    throw std::invalid_argument("gaussian_center_map: gt center outside the map");
  const double radius_cells = std::max(1.0, gaussian_radius(gt.w, gt.h) / stride);
  const double sigma = radius_cells / 3.0;
  Tensor out({map_h, map_w});
  for (int y = 0; y < map_h; ++y)
    for (int x = 0; x < map_w; ++x) {
      const double dx = x - i0, dy = y - j0;
      out.at2(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return out;
}

NodeRef loss_cls(Tape& t, NodeRef o_cls, const MatchLabels& labels) {
  const Tensor& o = o_cls->value;
  if (o.rank() != 3 || o.dim(0) != 2 * labels.k || o.dim(1) != labels.map_h ||
      o.dim(2) != labels.map_w)
    throw std::invalid_argument("loss_cls: output shape " + shape_str(o.shape) +
                                " does not match labels");
  require_finite(o, "loss_cls input");
  double total = 0.0;
  Tensor grad(o.shape);
  for (int m = 0; m < labels.k; ++m)
    for (int y = 0; y < labels.map_h; ++y)
      for (int x = 0; x < labels.map_w; ++x) {
        const AnchorLabel lab = labels.labels[(static_cast<std::size_t>(m) * labels.map_h + y) *
                                              labels.map_w + x];
        if (lab == AnchorLabel::ignore) continue;
        const double target = lab == AnchorLabel::positive ? 1.0 : 0.0;
        const CellLoss cl = cell_cross_entropy(o.at3(2 * m, y, x), o.at3(2 * m + 1, y, x), target);
        total += cl.loss;
        grad.at3(2 * m, y, x) = cl.d_neg;
        grad.at3(2 * m + 1, y, x) = cl.d_pos;
      }
  return t.record(Tensor::scalar(total), [o_cls, grad](const Tensor& g) {
    Tensor gx = grad;
    for (auto& v : gx.data) v *= g.data[0];
    accumulate_grad(*o_cls, gx);
  });
}

NodeRef loss_reg(Tape& t, NodeRef o_reg, const MatchLabels& labels) {
  const Tensor& o = o_reg->value;
  if (o.rank() != 3 || o.dim(0) != 4 * labels.k || o.dim(1) != labels.map_h ||
      o.dim(2) != labels.map_w)
    throw std::invalid_argument("loss_reg: output shape " + shape_str(o.shape) +
                                " does not match labels");
  require_finite(o, "loss_reg input");
  const int n_pos = labels.positive_count;
  if (n_pos == 0) {
    return t.record(Tensor::scalar(0.0), [o_reg](const Tensor&) {
      accumulate_grad(*o_reg, Tensor(o_reg->value.shape));
    });
  }
  const double inv_n = 1.0 / n_pos;
  double total = 0.0;
  Tensor grad(o.shape);
  for (int m = 0; m < labels.k; ++m)
    for (int y = 0; y < labels.map_h; ++y)
      for (int x = 0; x < labels.map_w; ++x) {
        const std::size_t ai = (static_cast<std::size_t>(m) * labels.map_h + y) * labels.map_w + x;
        if (labels.labels[ai] != AnchorLabel::positive) continue;
        for (int d = 0; d < 4; ++d) {
          const double diff = o.at3(4 * m + d, y, x) - labels.deltas[ai][static_cast<std::size_t>(d)];
          total += std::fabs(diff) * inv_n;
          grad.at3(4 * m + d, y, x) = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) * inv_n;
        }
      }
  return t.record(Tensor::scalar(total), [o_reg, grad](const Tensor& g) {
    Tensor gx = grad;
    for (auto& v : gx.data) v *= g.data[0];
    accumulate_grad(*o_reg, gx);
  });
}

NodeRef loss_loc(Tape& t, NodeRef o_loc, const Tensor& center_target) {
  const Tensor& o = o_loc->value;
  if (o.rank() != 3 || o.dim(0) != 2)
    throw std::invalid_argument("loss_loc: output must be [2,h,w]");
  if (center_target.rank() != 2 || center_target.dim(0) != o.dim(1) ||
      center_target.dim(1) != o.dim(2))
    throw std::invalid_argument("loss_loc: target shape mismatch");
  require_finite(o, "loss_loc input");
  double total = 0.0;
  Tensor grad(o.shape);
  for (int y = 0; y < o.dim(1); ++y)
    for (int x = 0; x < o.dim(2); ++x) {
      const CellLoss cl = cell_cross_entropy(o.at3(0, y, x), o.at3(1, y, x), center_target.at2(y, x));
      total += cl.loss;
      grad.at3(0, y, x) = cl.d_neg;
      grad.at3(1, y, x) = cl.d_pos;
    }
  return t.record(Tensor::scalar(total), [o_loc, grad](const Tensor& g) {
    Tensor gx = grad;
    for (auto& v : gx.data) v *= g.data[0];
    accumulate_grad(*o_loc, gx);
  });
}

LossBreakdown loss_total(Tape& t, NodeRef o_cls, NodeRef o_reg, NodeRef o_loc,
                         const MatchLabels& labels, const Tensor& center_target,
                         const LossWeights& lw, bool positive_pair) {
  if (lw.cls < 0 || lw.reg < 0 || lw.loc < 0)
    throw std::invalid_argument("loss_total: negative lambda");
  LossBreakdown out;
  out.lambdas = lw;
  out.cls = loss_cls(t, o_cls, labels);
  if (positive_pair) {
    out.reg = loss_reg(t, o_reg, labels);
    out.loc = loss_loc(t, o_loc, center_target);
  } else {
    out.reg = t.leaf(Tensor::scalar(0.0));
    out.loc = t.leaf(Tensor::scalar(0.0));
  }
  out.total = ops::add(t, ops::add(t, ops::scale(t, out.cls, lw.cls), ops::scale(t, out.reg, lw.reg)),
                       ops::scale(t, out.loc, lw.loc));
  return out;
}

}  // namespace siamman
