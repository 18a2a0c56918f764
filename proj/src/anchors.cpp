#include "siamman/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace siamman {

double iou(const Box& a, const Box& b) {
  const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
  const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
  const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
  const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
  const double ix = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double iy = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

AnchorSet generate_anchors(int map_w, int map_h, const AnchorConfig& cfg) {
  if (map_w < 1 || map_h < 1) throw std::invalid_argument("generate_anchors: empty map");
  AnchorSet set;
  set.map_w = map_w;
  set.map_h = map_h;
  set.k = static_cast<int>(cfg.ratios.size());
  set.stride = cfg.stride;
  set.boxes.resize(static_cast<std::size_t>(set.k) * map_h * map_w);
  const double base = cfg.scale * cfg.stride;
  const double ox = (map_w - 1) / 2.0;
  const double oy = (map_h - 1) / 2.0;
  for (int m = 0; m < set.k; ++m) {
    const double r = cfg.ratios[static_cast<std::size_t>(m)];
    const double aw = base * std::sqrt(r);
    const double ah = base / std::sqrt(r);
    for (int y = 0; y < map_h; ++y)
      for (int x = 0; x < map_w; ++x)
        set.boxes[set.index(m, y, x)] = Box{(x - ox) * cfg.stride, (y - oy) * cfg.stride, aw, ah};
  }
  return set;
}

MatchLabels match_anchors(const AnchorSet& anchors, const Box& gt, const AnchorConfig& cfg) {
  if (gt.w <= 0 || gt.h <= 0) throw std::invalid_argument("match_anchors: degenerate gt box");
  MatchLabels out;
  out.map_w = anchors.map_w;
  out.map_h = anchors.map_h;
  out.k = anchors.k;
  out.labels.resize(anchors.count());
  out.deltas.resize(anchors.count());
  for (std::size_t i = 0; i < anchors.count(); ++i) {
    const double ov = iou(anchors.boxes[i], gt);
    if (ov > cfg.pos_thresh) {
      out.labels[i] = AnchorLabel::positive;
      out.deltas[i] = encode_delta(anchors.boxes[i], gt, cfg.paper_literal_delta);
      ++out.positive_count;
    } else if (ov < cfg.neg_thresh) {
      out.labels[i] = AnchorLabel::negative;
    } else {
      out.labels[i] = AnchorLabel::ignore;
    }
  }
  return out;
}

MatchLabels all_negative_labels(const AnchorSet& anchors) {
  MatchLabels out;
  out.map_w = anchors.map_w;
  out.map_h = anchors.map_h;
  out.k = anchors.k;
  out.labels.assign(anchors.count(), AnchorLabel::negative);
  out.deltas.resize(anchors.count());
  return out;
}

std::array<double, 4> encode_delta(const Box& anchor, const Box& gt, bool paper_literal) {
  if (anchor.w <= 0 || anchor.h <= 0 || gt.w <= 0 || gt.h <= 0)
    throw std::invalid_argument("encode_delta: degenerate box");
  if (paper_literal) {
    if (anchor.cx == 0 || anchor.cy == 0)
      throw std::invalid_argument("encode_delta: literal mode singular at zero center coordinate");
    return {(gt.cx - anchor.cx) / anchor.cx, (gt.cy - anchor.cy) / anchor.cy,
            std::log(gt.w / anchor.w), std::log(gt.h / anchor.h)};
  }
  return {(gt.cx - anchor.cx) / anchor.w, (gt.cy - anchor.cy) / anchor.h,
          std::log(gt.w / anchor.w), std::log(gt.h / anchor.h)};
}

Box decode_delta(const Box& anchor, const std::array<double, 4>& delta, bool paper_literal) {
  Box b;
  if (paper_literal) {
    b.cx = anchor.cx + delta[0] * anchor.cx;
    b.cy = anchor.cy + delta[1] * anchor.cy;
  } else {
    b.cx = anchor.cx + delta[0] * anchor.w;
    b.cy = anchor.cy + delta[1] * anchor.h;
  }
  b.w = anchor.w * std::exp(delta[2]);
  b.h = anchor.h * std::exp(delta[3]);
  return b;
}

}  // namespace siamman
