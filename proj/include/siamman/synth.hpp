#pragma once

#include <cstdint>
#include <vector>

#include "siamman/anchors.hpp"
#include "siamman/tensor.hpp"

namespace siamman {

// Procedural stand-in for real video: textured rectangles and ellipses
// moving over a textured background. Every frame is a pure function of
// (seed, track, frame index), so datasets never need to be stored.
struct SynthConfig {
  int frame_w = 256;
  int frame_h = 256;
  int length = 150;
  int num_tracks = 8;
  double min_size = 40;
  double max_size = 72;
  double max_speed = 4.0;
  double scale_drift = 0.0;  // per-frame relative size change limit
  bool occluders = false;
  std::uint64_t seed = 7;
};

class TrackStore {
 public:
  explicit TrackStore(const SynthConfig& cfg);
  // single straight-line track with the given velocity, for held-out
  // evaluation sequences
  static TrackStore constant_velocity(const SynthConfig& cfg, double vx, double vy);

  const SynthConfig& config() const { return cfg_; }
  int num_tracks() const { return static_cast<int>(tracks_.size()); }
  int length() const { return cfg_.length; }
  Box gt(int track, int t) const;
  Tensor frame(int track, int t) const;

 private:
  struct Track {
    std::uint64_t id;
    bool ellipse;
    double tex_freq_u, tex_freq_v;
    std::array<double, 3> color_a, color_b, bg_base;
    double bg_fx, bg_fy, bg_px, bg_py;
    double w0, h0, drift;
    std::vector<std::array<double, 2>> pos;  // per frame
    // occluder stripe, used when the config enables it
    double occ_x = 0, occ_y = 0, occ_w = 0, occ_h = 0;
  };

  Track make_track(std::uint64_t id, double* fixed_v) const;

  SynthConfig cfg_;
  std::vector<Track> tracks_;
};

}  // namespace siamman
