#include "siamman/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "siamman/image.hpp"
#include "siamman/ops.hpp"

namespace siamman {

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.total_epochs)
    throw std::invalid_argument("lr_schedule: epoch " + std::to_string(epoch) +
                                " outside [1," + std::to_string(cfg.total_epochs) + "]");
  if (epoch <= cfg.warmup_epochs) {
    if (cfg.warmup_epochs == 1) return cfg.lr_peak;
    const double f = static_cast<double>(epoch - 1) / (cfg.warmup_epochs - 1);
    return cfg.lr_initial + f * (cfg.lr_peak - cfg.lr_initial);
  }
  const double f = static_cast<double>(epoch - cfg.warmup_epochs) /
                   (cfg.total_epochs - cfg.warmup_epochs);
  return cfg.lr_peak * std::pow(cfg.lr_final / cfg.lr_peak, f);
}

void sgd_step(Param& p, const Tensor& grad, double lr, double momentum, double weight_decay) {
  if (!grad.same_shape(p.value))
    throw std::invalid_argument("sgd_step: grad shape mismatch for " + p.name);
  for (std::size_t i = 0; i < p.value.data.size(); ++i) {
    p.velocity.data[i] =
        momentum * p.velocity.data[i] + grad.data[i] + weight_decay * p.value.data[i];
    p.value.data[i] -= lr * p.velocity.data[i];
  }
}

namespace {

// crop a training patch around `center_box` and return the gt in
// patch-center-relative pixels
Tensor crop_patch(const Tensor& frame, const Box& crop_center_box, double side, int out_size,
                  const Box* gt_frame, Box* gt_patch) {
  Tensor patch = crop_resize(frame, crop_center_box.cx, crop_center_box.cy, side, out_size,
                             channel_means(frame));
  if (gt_frame && gt_patch) {
    const double scale = out_size / side;
    gt_patch->cx = (gt_frame->cx - crop_center_box.cx) * scale;
    gt_patch->cy = (gt_frame->cy - crop_center_box.cy) * scale;
    gt_patch->w = gt_frame->w * scale;
    gt_patch->h = gt_frame->h * scale;
  }
  return patch;
}

void blur3(Tensor& patch) {
  Tensor out = patch;
  const int h = patch.dim(1), w = patch.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::clamp(y + dy, 0, h - 1);
            const int xx = std::clamp(x + dx, 0, w - 1);
            acc += patch.at3(c, yy, xx);
          }
        out.at3(c, y, x) = acc / 9.0;
      }
  patch = std::move(out);
}

void flip_h(Tensor& patch, Box* box) {
  const int h = patch.dim(1), w = patch.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w / 2; ++x)
        std::swap(patch.data[patch.idx3(c, y, x)], patch.data[patch.idx3(c, y, w - 1 - x)]);
  if (box) box->cx = -box->cx;  // mirror about the patch center
}

// resample about the patch center: out(p) = in(center + R(-theta)*(p-center)/f)
void warp(Tensor& patch, Box* box, double f, double theta_rad) {
  const int h = patch.dim(1), w = patch.dim(2);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  const double cosr = std::cos(theta_rad), sinr = std::sin(theta_rad);
  const std::array<double, 3> pad = channel_means(patch);
  Tensor out(patch.shape);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = (x - cx), dy = (y - cy);
        const double sx = cx + (cosr * dx + sinr * dy) / f;
        const double sy = cy + (-sinr * dx + cosr * dy) / f;
        if (sx < 0 || sx > w - 1 || sy < 0 || sy > h - 1) {
          out.at3(c, y, x) = pad[static_cast<std::size_t>(c)];
          continue;
        }
        const int ix = static_cast<int>(sx), iy = static_cast<int>(sy);
        const int ix1 = std::min(ix + 1, w - 1), iy1 = std::min(iy + 1, h - 1);
        const double fx = sx - ix, fy = sy - iy;
        const double a = patch.at3(c, iy, ix), b = patch.at3(c, iy, ix1);
        const double d = patch.at3(c, iy1, ix), e = patch.at3(c, iy1, ix1);
        const double top = a + fx * (b - a), bot = d + fx * (e - d);
        out.at3(c, y, x) = top + fy * (bot - top);
      }
  patch = std::move(out);
  if (box) {
    // forward transform of the box: rotate corners, take the bounding box
    const double bx = box->cx * f, by = box->cy * f;
    const double hw = box->w * f / 2, hh = box->h * f / 2;
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (int sx = -1; sx <= 1; sx += 2)
      for (int sy = -1; sy <= 1; sy += 2) {
        const double px = bx + sx * hw, py = by + sy * hh;
        const double rx = cosr * px - sinr * py;
        const double ry = sinr * px + cosr * py;
        min_x = std::min(min_x, rx);
        max_x = std::max(max_x, rx);
        min_y = std::min(min_y, ry);
        max_y = std::max(max_y, ry);
      }
    box->cx = (min_x + max_x) / 2;
    box->cy = (min_y + max_y) / 2;
    box->w = max_x - min_x;
    box->h = max_y - min_y;
  }
}

void grayscale(Tensor& patch) {
  const int h = patch.dim(1), w = patch.dim(2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double l = 0.299 * patch.at3(0, y, x) + 0.587 * patch.at3(1, y, x) +
                       0.114 * patch.at3(2, y, x);
      for (int c = 0; c < 3; ++c) patch.at3(c, y, x) = l;
    }
}

}  // namespace

void augment_patch(Tensor& patch, Box* box, Rng& rng, const AugmentConfig& cfg) {
  if (rng.bernoulli(cfg.p_flip)) flip_h(patch, box);
  if (rng.bernoulli(cfg.p_rescale))
    warp(patch, box, rng.uniform(cfg.rescale_lo, cfg.rescale_hi), 0.0);
  if (rng.bernoulli(cfg.p_rotate)) {
    const double deg = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg);
    warp(patch, box, 1.0, deg * 3.14159265358979323846 / 180.0);
  }
  if (rng.bernoulli(cfg.p_blur)) blur3(patch);
  if (rng.bernoulli(cfg.p_gray)) grayscale(patch);
}

TrainPair sample_pair(const TrackStore& store, Rng& rng, const TrainConfig& cfg, int exemplar_size,
                      int search_size) {
  TrainPair pair;
  pair.positive = rng.uniform() < cfg.pos_fraction;
  const int len = store.length();

  const int track_a = rng.uniform_int(0, store.num_tracks() - 1);
  pair.track = track_a;
  const int frame_a = rng.uniform_int(0, len - 1);
  pair.frame_a = frame_a;
  const Box gt_a = store.gt(track_a, frame_a);
  const Tensor frame_tmpl = store.frame(track_a, frame_a);
  pair.templ = crop_patch(frame_tmpl, gt_a, context_side(gt_a), exemplar_size, nullptr, nullptr);

  if (pair.positive) {
    // same track, frame interval strictly below the cap
    const int max_d = std::min(cfg.max_frame_interval - 1, len - 1);
    const int d = max_d >= 1 ? rng.uniform_int(1, max_d) : 0;
    int frame_b = frame_a + (rng.bernoulli(0.5) ? d : -d);
    if (frame_b < 0 || frame_b >= len) frame_b = frame_a - (frame_b - frame_a);
    frame_b = std::clamp(frame_b, 0, len - 1);
    pair.frame_b = frame_b;
    const Box gt_b = store.gt(track_a, frame_b);
    const Tensor frame_det = store.frame(track_a, frame_b);
    const double jitter = 1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter);
    const double side_x = context_side(gt_b) * search_size / exemplar_size * jitter;
    Box crop_center = gt_b;
    crop_center.cx += rng.uniform(-cfg.shift_frac, cfg.shift_frac) * side_x;
    crop_center.cy += rng.uniform(-cfg.shift_frac, cfg.shift_frac) * side_x;
    pair.search = crop_patch(frame_det, crop_center, side_x, search_size, &gt_b, &pair.gt);
  } else {
    // a patch that contains no instance of the template object
    int track_b = track_a;
    if (store.num_tracks() > 1)
      while (track_b == track_a) track_b = rng.uniform_int(0, store.num_tracks() - 1);
    const int frame_b = rng.uniform_int(0, len - 1);
    pair.frame_b = frame_b;
    const Tensor frame_det = store.frame(track_b, frame_b);
    const Box gt_b = store.gt(track_b, frame_b);
    const double side_x = context_side(gt_b) * search_size / exemplar_size;
    Box crop_center = gt_b;
    if (store.num_tracks() == 1) {
      // single-track store: sample pure background away from the target
      crop_center.cx = gt_b.cx > frame_det.dim(2) / 2.0 ? side_x / 2 : frame_det.dim(2) - side_x / 2;
      crop_center.cy = gt_b.cy > frame_det.dim(1) / 2.0 ? side_x / 2 : frame_det.dim(1) - side_x / 2;
    } else {
      crop_center.cx = rng.uniform(side_x / 3, frame_det.dim(2) - side_x / 3);
      crop_center.cy = rng.uniform(side_x / 3, frame_det.dim(1) - side_x / 3);
    }
    pair.search = crop_patch(frame_det, crop_center, side_x, search_size, nullptr, nullptr);
    pair.gt = Box{0, 0, 1, 1};
  }

  augment_patch(pair.templ, nullptr, rng, AugmentConfig{0.0, cfg.augment.p_blur, 0.0, 0.0,
                                                        cfg.augment.p_gray});
  if (pair.positive) {
    augment_patch(pair.search, &pair.gt, rng, cfg.augment);
  } else {
    augment_patch(pair.search, nullptr, rng, cfg.augment);
  }
  return pair;
}

std::vector<TrainPair> make_fixed_pairs(const TrackStore& store, const TrainConfig& cfg,
                                        int exemplar_size, int search_size, int count) {
  Rng rng(hash2(cfg.seed, 0xfa1b));
  std::vector<TrainPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(sample_pair(store, rng, cfg, exemplar_size, search_size));
  return out;
}

namespace {

struct PairLoss {
  double total, cls, reg, loc;
};

PairLoss pair_loss(SiamMan& model, Tape& tape, const TrainPair& pair, const LossWeights& lw,
                   bool use_attention, const AnchorConfig& acfg, ModelForward* fw_out) {
  const int map = model.config().map_size();
  const AnchorSet anchors = generate_anchors(map, map, acfg);

  ModelForward fw = model.forward(tape, pair.templ, pair.search, use_attention);
  MatchLabels labels =
      pair.positive ? match_anchors(anchors, pair.gt, acfg) : all_negative_labels(anchors);
  Tensor target = pair.positive ? gaussian_center_map(pair.gt, map, map, acfg.stride)
                                : Tensor({map, map});
  LossBreakdown lb =
      loss_total(tape, fw.out.cls, fw.out.reg, fw.out.loc, labels, target, lw, pair.positive);
  tape.backward(lb.total);
  if (fw_out) *fw_out = std::move(fw);
  return {lb.total->value.data[0], lb.cls->value.data[0], lb.reg->value.data[0],
          lb.loc->value.data[0]};
}

}  // namespace

double evaluate_pairs(SiamMan& model, const std::vector<TrainPair>& pairs, const LossWeights& lw,
                      bool use_attention, const AnchorConfig& anchors) {
  double total = 0;
  for (const auto& p : pairs) {
    Tape tape;
    total += pair_loss(model, tape, p, lw, use_attention, anchors, nullptr).total;
  }
  return total / static_cast<double>(pairs.size());
}

StepRecord train_step(SiamMan& model, const std::vector<TrainPair>& batch, const LossWeights& lw,
                      const std::vector<ParamGroup>& active, bool use_attention, double lr,
                      const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::unordered_map<const Param*, Tensor> grads;
  StepRecord rec;
  for (const auto& pair : batch) {
    Tape tape;
    ModelForward fw;
    PairLoss pl = pair_loss(model, tape, pair, lw, use_attention, cfg.anchors, &fw);
    rec.total += pl.total * inv_b;
    rec.cls += pl.cls * inv_b;
    rec.reg += pl.reg * inv_b;
    rec.loc += pl.loc * inv_b;
    for (const auto& [param, leaf] : fw.param_leaves) {
      if (!leaf->grad_touched) continue;
      auto it = grads.find(param);
      if (it == grads.end()) {
        Tensor g = leaf->grad;
        for (auto& v : g.data) v *= inv_b;
        grads.emplace(param, std::move(g));
      } else {
        for (std::size_t i = 0; i < it->second.data.size(); ++i)
          it->second.data[i] += leaf->grad.data[i] * inv_b;
      }
    }
  }

  for (auto& p : model.params().all()) {
    if (std::find(active.begin(), active.end(), p.group) == active.end()) continue;
    auto it = grads.find(&p);
    if (it == grads.end()) continue;
    sgd_step(p, it->second, lr, cfg.momentum, cfg.weight_decay);
  }
  rec.lr = lr;
  return rec;
}

std::vector<PhaseSpec> stage_phases(const TrainConfig& cfg) {
  const LossWeights full = cfg.lambdas;
  // stage 1 supervises classification and regression only
  const LossWeights no_loc{cfg.lambdas.cls, cfg.lambdas.reg, 0.0};
  return {
      {1, 'a', cfg.s1a, 0, false, {ParamGroup::cls_head, ParamGroup::reg_head}, no_loc},
      {1, 'b', cfg.s1b, cfg.s1a, false,
       {ParamGroup::backbone, ParamGroup::cls_head, ParamGroup::reg_head}, no_loc},
      {2, 'a', cfg.s2a, 0, false,
       {ParamGroup::cls_head, ParamGroup::reg_head, ParamGroup::loc_head}, full},
      {2, 'b', cfg.s2b, cfg.s2a, false,
       {ParamGroup::backbone, ParamGroup::cls_head, ParamGroup::reg_head, ParamGroup::loc_head},
       full},
      {3, 'a', cfg.s3a, 0, true, {ParamGroup::attention}, full},
      {3, 'b', cfg.s3b, cfg.s3a, true,
       {ParamGroup::backbone, ParamGroup::cls_head, ParamGroup::reg_head, ParamGroup::loc_head,
        ParamGroup::attention},
       full},
  };
}

void train_stages(SiamMan& model, const TrackStore& store, const TrainConfig& cfg,
                  const std::string& out_dir, const LogSink& sink) {
  const std::vector<PhaseSpec> phases = stage_phases(cfg);

  const int e_size = model.config().backbone.exemplar_size;
  const int s_size = model.config().backbone.search_size;
  std::vector<TrainPair> fixed;
  if (cfg.fixed_pairs > 0) fixed = make_fixed_pairs(store, cfg, e_size, s_size, cfg.fixed_pairs);

  Rng sample_rng(hash2(cfg.seed, 0x5a3));
  int global_step = 0;
  std::size_t fixed_cursor = 0;

  for (const auto& ph : phases) {
    model.params().zero_velocities();
    for (int epoch = 1; epoch <= ph.epochs; ++epoch) {
      const double lr = lr_schedule(ph.epoch_offset + epoch, cfg) * cfg.lr_scale;
      for (int it = 0; it < cfg.iters_per_epoch; ++it) {
        std::vector<TrainPair> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) {
          if (!fixed.empty()) {
            batch.push_back(fixed[fixed_cursor % fixed.size()]);
            ++fixed_cursor;
          } else {
            batch.push_back(sample_pair(store, sample_rng, cfg, e_size, s_size));
          }
        }
        StepRecord rec = train_step(model, batch, ph.lw, ph.active, ph.attention, lr, cfg);
        rec.step = ++global_step;
        rec.stage = ph.stage;
        rec.phase = ph.phase;
        rec.epoch = ph.epoch_offset + epoch;
        if (sink) sink(rec);
      }
    }
    if (!out_dir.empty() && ph.phase == 'b')
      model.params().save(out_dir + "/stage" + std::to_string(ph.stage) + ".ckpt");
  }
  if (!out_dir.empty()) model.params().save(out_dir + "/final.ckpt");
}

}  // namespace siamman
