#pragma once

#include <functional>
#include <vector>

#include "siamman/anchors.hpp"
#include "siamman/image.hpp"
#include "siamman/model.hpp"

namespace siamman {

struct FusionConfig {
  double omega1 = 0.7;  // classification vs localization mix
  double omega2 = 0.6;  // appearance vs cosine-window mix
  double k_pen = 0.04;  // scale-penalty strength
  double eta0 = 0.3;    // base size-interpolation rate
};

struct TrackState {
  Box box;            // frame coordinates
  double score = 1.0; // fused score of the selected candidate, in [0,1]
};

// outer product of 1-D Hann windows: 1 at the center, 0 on the border
Tensor cosine_window(int w, int h);

// foreground probabilities: softmax over each anchor's (bg,fg) channel pair
Tensor cls_foreground(const Tensor& o_cls, int k);  // [2k,h,w] -> [k,h,w]
Tensor loc_foreground(const Tensor& o_loc);         // [2,h,w]  -> [1,h,w]

// every anchor decoded with its predicted delta, AnchorSet order
std::vector<Box> decode_all_candidates(const Tensor& o_reg, const AnchorSet& anchors,
                                       bool paper_literal = false);

// rho = exp(-k_pen * (r_c * s_c - 1)) with the aspect-change factor
// r_c = max(r/r', r'/r) and the context-padded size-change factor
// s_c = max(s/s', s'/s); equals 1 when the candidate matches prev
double scale_penalty_one(const Box& candidate, const Box& prev, double k_pen);
Tensor scale_penalty(const std::vector<Box>& candidates, const AnchorSet& anchors,
                     const Box& prev, double k_pen);  // [k,h,w]

// Theta = w2 * rho * (w1*u + (1-w1)*c) + (1-w2) * xi, elementwise; c and xi
// are expanded across the k anchor planes
Tensor fuse_scores(const Tensor& u, const Tensor& c, const Tensor& xi, const Tensor& rho,
                   const FusionConfig& cfg);

struct Selection {
  int m = 0, y = 0, x = 0;
  double theta = 0, rho = 1;
  Box raw;  // decoded box before smoothing
};

// Argmax over Theta (ties broken by lowest flat index), decode the selected
// anchor, adopt the center, and smooth the size with
// eta = clamp(eta0 * rho_sel * theta_sel, 0, 1).
TrackState select_and_update(const Tensor& theta, const Tensor& o_reg, const AnchorSet& anchors,
                             const TrackState& prev, const FusionConfig& cfg,
                             bool paper_literal = false, Selection* debug = nullptr);

struct TrackerConfig {
  AnchorConfig anchors;
  FusionConfig fusion;
  // ablation: replace the localization term c with u in the fusion, so the
  // center heatmap no longer contributes
  bool use_loc_in_fusion = true;
};

// Tracks one sequence: the template is encoded from the first frame and
// never updated; every later frame runs crop -> forward -> fuse -> update.
using FrameProvider = std::function<Tensor(int)>;
std::vector<TrackState> track_sequence(SiamMan& model, const FrameProvider& frames, int n_frames,
                                       const Box& init_box, const TrackerConfig& cfg);

}  // namespace siamman
