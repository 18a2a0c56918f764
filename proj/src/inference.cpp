#include "siamman/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "siamman/ops.hpp"

namespace siamman {

Tensor cosine_window(int w, int h) {
  if (w < 1 || h < 1) throw std::invalid_argument("cosine_window: empty window");
  auto hann = [](int i, int n) {
    if (n == 1) return 1.0;
    return 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i / (n - 1)));
  };
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at2(y, x) = hann(y, h) * hann(x, w);
  return out;
}

Tensor cls_foreground(const Tensor& o_cls, int k) {
  if (o_cls.rank() != 3 || o_cls.dim(0) != 2 * k)
    throw std::invalid_argument("cls_foreground: expected [2k,h,w]");
  const int h = o_cls.dim(1), w = o_cls.dim(2);
  Tensor u({k, h, w});
  for (int m = 0; m < k; ++m)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double zn = o_cls.at3(2 * m, y, x);
        const double zp = o_cls.at3(2 * m + 1, y, x);
        const double mx = std::max(zn, zp);
        const double en = std::exp(zn - mx), ep = std::exp(zp - mx);
        u.at3(m, y, x) = ep / (en + ep);
      }
  return u;
}

Tensor loc_foreground(const Tensor& o_loc) {
  if (o_loc.rank() != 3 || o_loc.dim(0) != 2)
    throw std::invalid_argument("loc_foreground: expected [2,h,w]");
  return cls_foreground(o_loc, 1);
}

std::vector<Box> decode_all_candidates(const Tensor& o_reg, const AnchorSet& anchors,
                                       bool paper_literal) {
  if (o_reg.rank() != 3 || o_reg.dim(0) != 4 * anchors.k || o_reg.dim(1) != anchors.map_h ||
      o_reg.dim(2) != anchors.map_w)
    throw std::invalid_argument("decode_all_candidates: o_reg shape mismatch");
  std::vector<Box> out(anchors.count());
  for (int m = 0; m < anchors.k; ++m)
    for (int y = 0; y < anchors.map_h; ++y)
      for (int x = 0; x < anchors.map_w; ++x) {
        const std::array<double, 4> d = {o_reg.at3(4 * m, y, x), o_reg.at3(4 * m + 1, y, x),
                                         o_reg.at3(4 * m + 2, y, x), o_reg.at3(4 * m + 3, y, x)};
        out[anchors.index(m, y, x)] = decode_delta(anchors.at(m, y, x), d, paper_literal);
      }
  return out;
}

double scale_penalty_one(const Box& candidate, const Box& prev, double k_pen) {
  auto change = [](double a, double b) { return std::max(a / b, b / a); };
  const double r_c = change(candidate.w / candidate.h, prev.w / prev.h);
  const double s_c = change(context_side(candidate), context_side(prev));
  return std::exp(-k_pen * (r_c * s_c - 1.0));
}

Tensor scale_penalty(const std::vector<Box>& candidates, const AnchorSet& anchors,
                     const Box& prev, double k_pen) {
  if (candidates.size() != anchors.count())
    throw std::invalid_argument("scale_penalty: candidate count mismatch");
  if (prev.w <= 0 || prev.h <= 0) throw std::invalid_argument("scale_penalty: bad previous box");
  Tensor rho({anchors.k, anchors.map_h, anchors.map_w});
  for (std::size_t i = 0; i < candidates.size(); ++i)
    rho.data[i] = scale_penalty_one(candidates[i], prev, k_pen);
  return rho;
}

Tensor fuse_scores(const Tensor& u, const Tensor& c, const Tensor& xi, const Tensor& rho,
                   const FusionConfig& cfg) {
  const int k = u.dim(0), h = u.dim(1), w = u.dim(2);
  if (u.rank() != 3 || c.rank() != 3 || c.dim(0) != 1 || c.dim(1) != h || c.dim(2) != w)
    throw std::invalid_argument("fuse_scores: c must be [1,h,w] matching u");
  if (xi.rank() != 2 || xi.dim(0) != h || xi.dim(1) != w)
    throw std::invalid_argument("fuse_scores: xi must be [h,w]");
  if (!rho.same_shape(u)) throw std::invalid_argument("fuse_scores: rho must match u");
  Tensor theta({k, h, w});
  for (int m = 0; m < k; ++m)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double appearance = cfg.omega1 * u.at3(m, y, x) + (1.0 - cfg.omega1) * c.at3(0, y, x);
        theta.at3(m, y, x) =
            cfg.omega2 * rho.at3(m, y, x) * appearance + (1.0 - cfg.omega2) * xi.at2(y, x);
      }
  return theta;
}

TrackState select_and_update(const Tensor& theta, const Tensor& o_reg, const AnchorSet& anchors,
                             const TrackState& prev, const FusionConfig& cfg, bool paper_literal,
                             Selection* debug) {
  if (theta.rank() != 3 || theta.dim(0) != anchors.k || theta.dim(1) != anchors.map_h ||
      theta.dim(2) != anchors.map_w)
    throw std::invalid_argument("select_and_update: theta shape mismatch");
  require_finite(theta, "select_and_update theta");
  // lowest flat index wins ties
  std::size_t best = 0;
  for (std::size_t i = 1; i < theta.data.size(); ++i)
    if (theta.data[i] > theta.data[best]) best = i;
  const int m = static_cast<int>(best / (static_cast<std::size_t>(anchors.map_h) * anchors.map_w));
  const int rem = static_cast<int>(best % (static_cast<std::size_t>(anchors.map_h) * anchors.map_w));
  const int y = rem / anchors.map_w;
  const int x = rem % anchors.map_w;

  const std::array<double, 4> d = {o_reg.at3(4 * m, y, x), o_reg.at3(4 * m + 1, y, x),
                                   o_reg.at3(4 * m + 2, y, x), o_reg.at3(4 * m + 3, y, x)};
  const Box raw = decode_delta(anchors.at(m, y, x), d, paper_literal);
  const double rho_sel = scale_penalty_one(raw, prev.box, cfg.k_pen);
  const double theta_sel = theta.data[best];
  const double eta = std::clamp(cfg.eta0 * rho_sel * theta_sel, 0.0, 1.0);

  TrackState next;
  next.box.cx = raw.cx;
  next.box.cy = raw.cy;
  next.box.w = (1.0 - eta) * prev.box.w + eta * raw.w;
  next.box.h = (1.0 - eta) * prev.box.h + eta * raw.h;
  next.score = theta_sel;
  if (debug) *debug = {m, y, x, theta_sel, rho_sel, raw};
  return next;
}

std::vector<TrackState> track_sequence(SiamMan& model, const FrameProvider& frames, int n_frames,
                                       const Box& init_box, const TrackerConfig& cfg) {
  if (n_frames < 1) throw std::invalid_argument("track_sequence: empty sequence");
  if (init_box.w <= 0 || init_box.h <= 0)
    throw std::invalid_argument("track_sequence: degenerate init box");

  const BackboneConfig& bb = model.config().backbone;
  const int map = model.config().map_size();
  AnchorConfig acfg = cfg.anchors;
  const AnchorSet anchors = generate_anchors(map, map, acfg);
  const Tensor window = cosine_window(map, map);

  Tensor first = frames(0);
  const int frame_h = first.dim(1), frame_w = first.dim(2);
  const std::array<double, 3> pad = channel_means(first);

  // template encoded once from frame 1, never updated
  const double s_z = context_side(init_box);
  Tensor templ_patch = crop_resize(first, init_box.cx, init_box.cy, s_z, bb.exemplar_size, pad);
  TemplateCache cache = model.encode_template(templ_patch);

  std::vector<TrackState> states;
  states.push_back({init_box, 1.0});

  for (int f = 1; f < n_frames; ++f) {
    Tensor frame = frames(f);
    const TrackState& prev = states.back();
    const double side_z = context_side(prev.box);
    const double side_x = side_z * bb.search_size / bb.exemplar_size;
    const double scale = bb.search_size / side_x;  // patch px per frame px
    Tensor search = crop_resize(frame, prev.box.cx, prev.box.cy, side_x, bb.search_size,
                                channel_means(frame));

    Tape tape;
    ModelForward fw = model.forward_with_template(tape, cache, search, true);

    Tensor u = cls_foreground(fw.out.cls->value, model.config().k);
    Tensor c = loc_foreground(fw.out.loc->value);
    std::vector<Box> cands = decode_all_candidates(fw.out.reg->value, anchors,
                                                   acfg.paper_literal_delta);
    // previous box in patch coordinates, centered on the crop
    const Box prev_patch{0, 0, prev.box.w * scale, prev.box.h * scale};
    Tensor rho = scale_penalty(cands, anchors, prev_patch, cfg.fusion.k_pen);
    Tensor theta;
    if (cfg.use_loc_in_fusion) {
      theta = fuse_scores(u, c, window, rho, cfg.fusion);
    } else {
      // c replaced by u: the appearance term collapses to u itself
      theta = Tensor(u.shape);
      for (int mm = 0; mm < anchors.k; ++mm)
        for (int yy = 0; yy < anchors.map_h; ++yy)
          for (int xx = 0; xx < anchors.map_w; ++xx)
            theta.at3(mm, yy, xx) = cfg.fusion.omega2 * rho.at3(mm, yy, xx) * u.at3(mm, yy, xx) +
                                    (1.0 - cfg.fusion.omega2) * window.at2(yy, xx);
    }

    TrackState sel = select_and_update(theta, fw.out.reg->value, anchors,
                                       TrackState{prev_patch, prev.score}, cfg.fusion,
                                       acfg.paper_literal_delta);

    TrackState next;
    next.box.cx = prev.box.cx + sel.box.cx / scale;
    next.box.cy = prev.box.cy + sel.box.cy / scale;
    next.box.w = sel.box.w / scale;
    next.box.h = sel.box.h / scale;
    next.score = sel.score;
    // keep the state inside the frame and the size sane
    next.box.cx = std::clamp(next.box.cx, 0.0, static_cast<double>(frame_w - 1));
    next.box.cy = std::clamp(next.box.cy, 0.0, static_cast<double>(frame_h - 1));
    next.box.w = std::clamp(next.box.w, 4.0, 2.0 * frame_w);
    next.box.h = std::clamp(next.box.h, 4.0, 2.0 * frame_h);
    states.push_back(next);
  }
  return states;
}

}  // namespace siamman
