#pragma once

#include <functional>
#include <string>
#include <vector>

#include "siamman/losses.hpp"
#include "siamman/model.hpp"
#include "siamman/synth.hpp"

namespace siamman {

struct AugmentConfig {
  double p_flip = 0.25;
  double p_blur = 0.15;
  double p_rescale = 0.20;
  double p_rotate = 0.15;
  double p_gray = 0.10;
  double max_rotate_deg = 10.0;
  double rescale_lo = 0.92;
  double rescale_hi = 1.08;
};

struct TrainConfig {
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // per-stage schedule: linear warmup then log-linear decay
  double lr_initial = 0.001;
  double lr_peak = 0.005;
  double lr_final = 0.0005;
  int warmup_epochs = 5;
  int total_epochs = 20;
  // desk-scale multiplier on the schedule; the summed losses of this model
  // need a much smaller step than the paper-scale batches the schedule was
  // written for
  double lr_scale = 1.0;
  LossWeights lambdas;
  int iters_per_epoch = 200;  // a desk "epoch" is this many steps
  int batch_size = 4;
  double pos_fraction = 0.8;     // positive:negative pairs 4:1
  int max_frame_interval = 100;  // positive pairs use interval < this
  double shift_frac = 0.25;
  double scale_jitter = 0.10;
  AugmentConfig augment;
  AnchorConfig anchors;
  // stage phase lengths in epochs
  int s1a = 10, s1b = 10, s2a = 10, s2b = 10, s3a = 15, s3b = 5;
  // when positive, pregenerate this many pairs and cycle batches through
  // them (the overfit regime); 0 samples fresh pairs every step
  int fixed_pairs = 0;
  std::uint64_t seed = 1;
};

// epoch is 1-based and must lie in [1, total_epochs]
double lr_schedule(int epoch, const TrainConfig& cfg);

// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v
void sgd_step(Param& p, const Tensor& grad, double lr, double momentum, double weight_decay);

struct TrainPair {
  Tensor templ;   // [3,E,E]
  Tensor search;  // [3,S,S]
  Box gt;         // patch-center-relative pixels, valid when positive
  bool positive = true;
  int track = 0, frame_a = 0, frame_b = 0;
};

TrainPair sample_pair(const TrackStore& store, Rng& rng, const TrainConfig& cfg, int exemplar_size,
                      int search_size);

// in-place augmentation; box (may be null) is transformed consistently with
// the geometric ops and is in patch-center-relative pixels
void augment_patch(Tensor& patch, Box* box, Rng& rng, const AugmentConfig& cfg);

struct StepRecord {
  int step = 0;        // global step index
  int stage = 0;       // 1..3
  char phase = 'a';
  int epoch = 0;       // stage-relative, 1-based
  double lr = 0;
  double total = 0, cls = 0, reg = 0, loc = 0;
};

using LogSink = std::function<void(const StepRecord&)>;

// forward-only mean total loss over the given pairs at the given weights
double evaluate_pairs(SiamMan& model, const std::vector<TrainPair>& pairs, const LossWeights& lw,
                      bool use_attention, const AnchorConfig& anchors = AnchorConfig{});

// pregenerated pair set for the fixed-pair regime (also used by tests)
std::vector<TrainPair> make_fixed_pairs(const TrackStore& store, const TrainConfig& cfg,
                                        int exemplar_size, int search_size, int count);

// one SGD step on an explicit batch; returns the batch-mean loss terms.
// Only parameters in groups listed by `active` are updated; attention
// toggles the gamma path. Used by the stage driver and directly by tests.
StepRecord train_step(SiamMan& model, const std::vector<TrainPair>& batch, const LossWeights& lw,
                      const std::vector<ParamGroup>& active, bool use_attention, double lr,
                      const TrainConfig& cfg);

// the phase table of train_stages, exposed for the freeze-contract tests
struct PhaseSpec {
  int stage;
  char phase;
  int epochs;
  int epoch_offset;
  bool attention;
  std::vector<ParamGroup> active;
  LossWeights lw;
};
std::vector<PhaseSpec> stage_phases(const TrainConfig& cfg);

// The three-stage schedule: stage 1 trains the classification and
// regression branches (first with the backbone frozen, then jointly) with
// the attention path disabled; stage 2 adds the localization branch the
// same way; stage 3 first learns the attention weights alone, then
// fine-tunes the whole network. Writes stageN.ckpt and final.ckpt into
// out_dir when it is non-empty.
void train_stages(SiamMan& model, const TrackStore& store, const TrainConfig& cfg,
                  const std::string& out_dir, const LogSink& sink);

}  // namespace siamman
