#include "siamman/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "siamman/rng.hpp"

namespace siamman {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;
}

TrackStore::Track TrackStore::make_track(std::uint64_t id, double* fixed_v) const {
  Rng rng(hash2(cfg_.seed, id * 2 + 1));
  Track tr;
  tr.id = hash2(cfg_.seed, id);
  tr.ellipse = rng.bernoulli(0.5);
  tr.tex_freq_u = rng.uniform(2.0, 4.5);
  tr.tex_freq_v = rng.uniform(2.0, 4.5);
  for (int c = 0; c < 3; ++c) {
    // bright, high-contrast target over a dim background
    tr.color_a[c] = rng.uniform(0.75, 0.98);
    tr.color_b[c] = rng.uniform(0.02, 0.30);
    tr.bg_base[c] = rng.uniform(0.30, 0.45);
  }
  tr.bg_fx = rng.uniform(0.5, 2.0);
  tr.bg_fy = rng.uniform(0.5, 2.0);
  tr.bg_px = rng.uniform(0, 1);
  tr.bg_py = rng.uniform(0, 1);
  tr.w0 = rng.uniform(cfg_.min_size, cfg_.max_size);
  tr.h0 = rng.uniform(cfg_.min_size, cfg_.max_size);
  tr.drift = cfg_.scale_drift > 0 ? rng.uniform(-cfg_.scale_drift, cfg_.scale_drift) : 0.0;

  double vx, vy;
  if (fixed_v) {
    vx = fixed_v[0];
    vy = fixed_v[1];
  } else {
    const double speed = rng.uniform(0.5, cfg_.max_speed);
    const double dir = rng.uniform(0, kTau);
    vx = speed * std::cos(dir);
    vy = speed * std::sin(dir);
  }

  // walk the trajectory once, reflecting at the margins
  const double margin_x = std::max(tr.w0, tr.h0) * 0.75 + 8;
  const double margin_y = margin_x;
  double x, y;
  if (fixed_v) {
    // straight line centered in the frame; shrink nothing, just start so the
    // whole path stays inside
    x = cfg_.frame_w / 2.0 - vx * (cfg_.length - 1) / 2.0;
    y = cfg_.frame_h / 2.0 - vy * (cfg_.length - 1) / 2.0;
    if (x < margin_x || x > cfg_.frame_w - margin_x || y < margin_y ||
        y > cfg_.frame_h - margin_y)
      throw std::invalid_argument("constant-velocity track does not fit the frame");
  } else {
    x = rng.uniform(margin_x, cfg_.frame_w - margin_x);
    y = rng.uniform(margin_y, cfg_.frame_h - margin_y);
  }
  tr.pos.reserve(static_cast<std::size_t>(cfg_.length));
  for (int t = 0; t < cfg_.length; ++t) {
    tr.pos.push_back({x, y});
    x += vx;
    y += vy;
    if (!fixed_v) {
      if (x < margin_x || x > cfg_.frame_w - margin_x) vx = -vx, x += 2 * vx;
      if (y < margin_y || y > cfg_.frame_h - margin_y) vy = -vy, y += 2 * vy;
    }
  }

  if (cfg_.occluders) {
    const auto& mid = tr.pos[static_cast<std::size_t>(cfg_.length / 2)];
    tr.occ_w = tr.w0 * 0.8;
    tr.occ_h = tr.h0 * 1.6;
    tr.occ_x = mid[0];
    tr.occ_y = mid[1];
  }
  return tr;
}

TrackStore::TrackStore(const SynthConfig& cfg) : cfg_(cfg) {
  if (cfg.num_tracks < 1 || cfg.length < 1)
    throw std::invalid_argument("synth config: empty store");
  for (int i = 0; i < cfg.num_tracks; ++i)
    tracks_.push_back(make_track(static_cast<std::uint64_t>(i), nullptr));
}

TrackStore TrackStore::constant_velocity(const SynthConfig& cfg, double vx, double vy) {
  TrackStore s(cfg);
  s.tracks_.clear();
  double v[2] = {vx, vy};
  s.tracks_.push_back(s.make_track(0xc0, v));
  return s;
}

Box TrackStore::gt(int track, int t) const {
  const Track& tr = tracks_.at(static_cast<std::size_t>(track));
  const auto& p = tr.pos.at(static_cast<std::size_t>(t));
  const double grow = std::pow(1.0 + tr.drift, t);
  return Box{p[0], p[1], tr.w0 * grow, tr.h0 * grow};
}

Tensor TrackStore::frame(int track, int t) const {
  const Track& tr = tracks_.at(static_cast<std::size_t>(track));
  const Box b = gt(track, t);
  Tensor img({3, cfg_.frame_h, cfg_.frame_w});

  const double cosr = 1.0, sinr = 0.0;  // axis-aligned targets
  for (int y = 0; y < cfg_.frame_h; ++y) {
    for (int x = 0; x < cfg_.frame_w; ++x) {
      // background: gentle waves plus faint per-pixel hash noise; kept nearly
      // uniform so the textured target is the only salient structure
      const double wave = 0.025 *
                          std::sin(kTau * (tr.bg_fx * x / cfg_.frame_w + tr.bg_px)) *
                          std::sin(kTau * (tr.bg_fy * y / cfg_.frame_h + tr.bg_py));
      const double noise =
          0.006 * (hash_unit(tr.id, static_cast<std::uint64_t>(y) * cfg_.frame_w + x) - 0.5);
      double px[3];
      for (int c = 0; c < 3; ++c) px[c] = tr.bg_base[c] + wave + noise;

      // 2x2 supersampled target coverage with a sharp checker texture
      double cov = 0.0, col[3] = {0, 0, 0};
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double fx = x + 0.25 + 0.5 * sx - b.cx;
          const double fy = y + 0.25 + 0.5 * sy - b.cy;
          const double u = (fx * cosr + fy * sinr) / b.w;
          const double v = (-fx * sinr + fy * cosr) / b.h;
          bool inside = tr.ellipse ? (4 * u * u + 4 * v * v) <= 1.0
                                   : (std::fabs(u) <= 0.5 && std::fabs(v) <= 0.5);
          if (!inside) continue;
          const double s =
              std::sin(kTau * tr.tex_freq_u * u) * std::sin(kTau * tr.tex_freq_v * v);
          for (int c = 0; c < 3; ++c) col[c] += s > 0 ? tr.color_a[c] : tr.color_b[c];
          cov += 1.0;
        }
      if (cov > 0) {
        const double a = cov / 4.0;
        for (int c = 0; c < 3; ++c) px[c] = (1 - a) * px[c] + col[c] / cov * a;
      }

      // occluder drawn over the target
      if (cfg_.occluders && std::fabs(x - tr.occ_x) <= tr.occ_w / 2 &&
          std::fabs(y - tr.occ_y) <= tr.occ_h / 2)
        for (int c = 0; c < 3; ++c) px[c] = tr.bg_base[c] * 1.15;

      for (int c = 0; c < 3; ++c) img.at3(c, y, x) = std::clamp(px[c], 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace siamman
