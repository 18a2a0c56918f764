#include "siamman/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace siamman {

Trajectory parse_trajectory(std::istream& is, const std::string& name) {
  Trajectory out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw std::runtime_error(name + ":" + std::to_string(lineno) + ": malformed value '" +
                                 tok + "'");
      }
    }
    if (vals.size() != 4 && vals.size() != 5)
      throw std::runtime_error(name + ":" + std::to_string(lineno) +
                               ": expected 4 or 5 comma-separated values");
    FrameBox fb;
    if (std::isnan(vals[0])) {
      fb.present = false;
      fb.confidence = vals.size() == 5 ? vals[4] : 0.0;
    } else {
      const double x1 = vals[0], y1 = vals[1], x2 = vals[2], y2 = vals[3];
      if (x2 <= x1 || y2 <= y1)
        throw std::runtime_error(name + ":" + std::to_string(lineno) + ": empty box");
      fb.present = true;
      fb.box = Box{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
      fb.confidence = vals.size() == 5 ? vals[4] : 1.0;
    }
    out.push_back(fb);
  }
  if (out.empty()) throw std::runtime_error(name + ": empty trajectory file");
  return out;
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trajectory: " + path);
  return parse_trajectory(is, path);
}

void write_trajectory(std::ostream& os, const Trajectory& traj, bool with_confidence) {
  os.setf(std::ios::fmtflags(0), std::ios::floatfield);
  char buf[160];
  for (const auto& fb : traj) {
    if (!fb.present) {
      if (with_confidence)
        std::snprintf(buf, sizeof buf, "nan,nan,nan,nan,%.6f\n", fb.confidence);
      else
        std::snprintf(buf, sizeof buf, "nan,nan,nan,nan\n");
    } else {
      const double x1 = fb.box.cx - fb.box.w / 2, y1 = fb.box.cy - fb.box.h / 2;
      const double x2 = fb.box.cx + fb.box.w / 2, y2 = fb.box.cy + fb.box.h / 2;
      if (with_confidence)
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%.6f\n", x1, y1, x2, y2,
                      fb.confidence);
      else
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f\n", x1, y1, x2, y2);
    }
    os << buf;
  }
}

double frame_iou(const FrameBox& a, const FrameBox& b) {
  if (!a.present || !b.present) return 0.0;
  return iou(a.box, b.box);
}

VotResult vot_accuracy_robustness(const Trajectory& traj, const Trajectory& gt) {
  if (traj.size() != gt.size())
    throw std::invalid_argument("vot scorer: trajectory and ground truth length mismatch");
  VotResult res;
  res.reset_frames.push_back(0);
  const int n = static_cast<int>(traj.size());
  int active_from = 0;  // first frame of the current run
  int skip_until = -1;  // re-initialization gap after a failure
  double acc_sum = 0;
  int acc_count = 0;
  for (int f = 0; f < n; ++f) {
    if (f <= skip_until) continue;
    const double ov = frame_iou(traj[static_cast<std::size_t>(f)], gt[static_cast<std::size_t>(f)]);
    if (ov == 0.0) {
      ++res.failures;
      skip_until = f + kReinitGap - 1;
      active_from = f + kReinitGap;
      if (active_from < n) res.reset_frames.push_back(active_from);
      continue;
    }
    if (f - active_from >= kBurnIn) {
      acc_sum += ov;
      ++acc_count;
    }
  }
  res.accuracy = acc_count > 0 ? acc_sum / acc_count : 0.0;
  return res;
}

std::vector<double> overlap_curve(const Trajectory& traj, const Trajectory& gt) {
  if (traj.size() != gt.size())
    throw std::invalid_argument("overlap_curve: length mismatch");
  std::vector<double> out(traj.size(), 0.0);
  bool failed = false;
  for (std::size_t f = 0; f < traj.size(); ++f) {
    const double ov = failed ? 0.0 : frame_iou(traj[f], gt[f]);
    if (ov == 0.0) failed = true;
    out[f] = ov;
  }
  return out;
}

double eao_lite(const std::vector<std::vector<double>>& curves, int n_lo, int n_hi) {
  if (curves.empty()) throw std::invalid_argument("eao_lite: no runs");
  if (n_lo < 1 || n_hi < n_lo) throw std::invalid_argument("eao_lite: bad bin interval");
  double outer = 0;
  for (int n = n_lo; n <= n_hi; ++n) {
    double inner = 0;
    for (const auto& c : curves) {
      const int take = std::min<int>(n, static_cast<int>(c.size()));
      double s = 0;
      for (int f = 0; f < take; ++f) s += c[static_cast<std::size_t>(f)];
      inner += take > 0 ? s / take : 0.0;
    }
    outer += inner / static_cast<double>(curves.size());
  }
  return outer / (n_hi - n_lo + 1);
}

OtbResult success_precision(const Trajectory& traj, const Trajectory& gt) {
  if (traj.size() != gt.size())
    throw std::invalid_argument("otb scorer: length mismatch");
  OtbResult res;
  std::vector<double> ious;
  std::vector<double> dists;
  for (std::size_t f = 0; f < traj.size(); ++f) {
    if (!gt[f].present) continue;  // frames without annotation are skipped
    ious.push_back(frame_iou(traj[f], gt[f]));
    if (traj[f].present) {
      const double dx = traj[f].box.cx - gt[f].box.cx;
      const double dy = traj[f].box.cy - gt[f].box.cy;
      dists.push_back(std::sqrt(dx * dx + dy * dy));
    } else {
      dists.push_back(1e12);
    }
  }
  if (ious.empty()) throw std::invalid_argument("otb scorer: no annotated frames");
  const double inv = 1.0 / static_cast<double>(ious.size());
  double auc = 0;
  for (int i = 0; i < kSuccessGrid; ++i) {
    const double tau = static_cast<double>(i) / (kSuccessGrid - 1);
    int hits = 0;
    for (double v : ious)
      if (v > tau) ++hits;  // strict inequality
    res.success_curve[static_cast<std::size_t>(i)] = hits * inv;
    auc += hits * inv;
  }
  res.success_auc = auc / kSuccessGrid;
  res.precision_curve.resize(51);
  for (int d = 0; d <= 50; ++d) {
    int hits = 0;
    for (double v : dists)
      if (v <= d) ++hits;
    res.precision_curve[static_cast<std::size_t>(d)] = hits * inv;
  }
  int hits20 = 0;
  for (double v : dists)
    if (v <= kPrecisionPx) ++hits20;
  res.precision_at_20 = hits20 * inv;
  return res;
}

LtbResult f_score_longterm(const Trajectory& traj, const Trajectory& gt) {
  if (traj.size() != gt.size())
    throw std::invalid_argument("ltb scorer: length mismatch");
  LtbResult res;
  std::set<double> thresholds;
  for (const auto& fb : traj) thresholds.insert(fb.confidence);
  for (double th : thresholds) {
    int reported = 0, correct = 0, present = 0;
    for (std::size_t f = 0; f < traj.size(); ++f) {
      if (gt[f].present) ++present;
      const bool report = traj[f].present && traj[f].confidence >= th;
      if (!report) continue;
      ++reported;
      if (gt[f].present && frame_iou(traj[f], gt[f]) > kLongTermIou) ++correct;
    }
    const double p = reported > 0 ? static_cast<double>(correct) / reported : 0.0;
    const double r = present > 0 ? static_cast<double>(correct) / present : 0.0;
    const double f1 = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
    res.curve.push_back({th, p, r, f1});
    if (f1 > res.max_f) {
      res.max_f = f1;
      res.best_threshold = th;
    }
  }
  if (res.curve.empty()) res.curve.push_back({0, 0, 0, 0});
  return res;
}

}  // namespace siamman
