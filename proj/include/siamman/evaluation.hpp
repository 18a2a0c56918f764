#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "siamman/anchors.hpp"

namespace siamman {

// Per-frame entry of a trajectory or ground-truth file. Files are CSV, one
// frame per line: x1,y1,x2,y2 with an optional fifth confidence column;
// "nan,nan,nan,nan" marks absence.
struct FrameBox {
  bool present = false;
  Box box;
  double confidence = 1.0;
};

using Trajectory = std::vector<FrameBox>;

Trajectory parse_trajectory(std::istream& is, const std::string& name);
Trajectory load_trajectory(const std::string& path);
void write_trajectory(std::ostream& os, const Trajectory& traj, bool with_confidence);

double frame_iou(const FrameBox& a, const FrameBox& b);

// re-initialization protocol constants (documented convention)
inline constexpr int kReinitGap = 5;   // frames skipped after a failure
inline constexpr int kBurnIn = 10;     // frames excluded from accuracy after a (re-)init
inline constexpr int kSuccessGrid = 101;
inline constexpr double kPrecisionPx = 20.0;
inline constexpr double kLongTermIou = 0.5;

struct VotResult {
  double accuracy = 0;  // mean IoU over active frames outside burn-in
  int failures = 0;     // frames with zero overlap while active
  std::vector<int> reset_frames;
};

VotResult vot_accuracy_robustness(const Trajectory& traj, const Trajectory& gt);

// overlap curve with the no-re-init convention: zero from the first failure on
std::vector<double> overlap_curve(const Trajectory& traj, const Trajectory& gt);

// Simplified expected-average-overlap: for each N in [n_lo, n_hi], the mean
// over runs of the average overlap of the first min(N, length) frames, then
// the mean over N. An approximation of the challenge measure, not the real
// protocol.
double eao_lite(const std::vector<std::vector<double>>& curves, int n_lo, int n_hi);

struct OtbResult {
  double success_auc = 0;
  double precision_at_20 = 0;
  std::array<double, kSuccessGrid> success_curve{};
  std::vector<double> precision_curve;  // thresholds 0..50 px
};

OtbResult success_precision(const Trajectory& traj, const Trajectory& gt);

struct PrPoint {
  double threshold, precision, recall, f;
};

struct LtbResult {
  double max_f = 0;
  double best_threshold = 0;
  std::vector<PrPoint> curve;
};

// Confidence-threshold sweep over the observed values; a report counts as
// correct when IoU with a present ground truth exceeds 0.5.
LtbResult f_score_longterm(const Trajectory& traj, const Trajectory& gt);

}  // namespace siamman
