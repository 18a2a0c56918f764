#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "siamman/tensor.hpp"

namespace siamman {

// Center-format box in pixels, w/h strictly positive.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;
};

double iou(const Box& a, const Box& b);

struct AnchorConfig {
  int stride = 8;
  std::vector<double> ratios = {1.0 / 3.0, 1.0 / 2.0, 1.0, 2.0, 3.0};  // width/height
  double scale = 8.0;       // base size = scale * stride
  double pos_thresh = 0.6;  // IoU above -> positive
  double neg_thresh = 0.3;  // IoU below -> negative
  // The printed delta formula divides center offsets by the center
  // coordinates; the default divides by the anchor size instead.
  bool paper_literal_delta = false;
};

// Anchors paved on the response-map lattice, coordinates relative to the
// search-patch center. Flat order is anchor-major: index = (m*h + y)*w + x,
// matching the channel layout of the prediction maps.
struct AnchorSet {
  int map_w = 0, map_h = 0, k = 0, stride = 8;
  std::vector<Box> boxes;

  std::size_t index(int m, int y, int x) const {
    return (static_cast<std::size_t>(m) * map_h + y) * map_w + x;
  }
  const Box& at(int m, int y, int x) const { return boxes[index(m, y, x)]; }
  std::size_t count() const { return boxes.size(); }
};

AnchorSet generate_anchors(int map_w, int map_h, const AnchorConfig& cfg);

enum class AnchorLabel : std::int8_t { negative = 0, positive = 1, ignore = 2 };

struct MatchLabels {
  int map_w = 0, map_h = 0, k = 0;
  std::vector<AnchorLabel> labels;                 // one per anchor, AnchorSet order
  std::vector<std::array<double, 4>> deltas;       // valid where positive
  int positive_count = 0;
};

// Single ground-truth box (one object per search patch). IoU > pos_thresh is
// positive, < neg_thresh negative, otherwise ignore; positives carry encoded
// regression targets.
MatchLabels match_anchors(const AnchorSet& anchors, const Box& gt, const AnchorConfig& cfg);

// all anchors negative (negative training pairs)
MatchLabels all_negative_labels(const AnchorSet& anchors);

std::array<double, 4> encode_delta(const Box& anchor, const Box& gt, bool paper_literal = false);
Box decode_delta(const Box& anchor, const std::array<double, 4>& delta, bool paper_literal = false);

}  // namespace siamman
