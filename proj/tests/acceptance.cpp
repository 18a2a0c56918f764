// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier than the unit tests: it runs the full gradient suite,
// three desk-scale trainings, tracking experiments, and the CLI determinism
// checks (the CLI path comes from the SIAMMAN_CLI environment variable).
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "siamman/config.hpp"
#include "siamman/evaluation.hpp"
#include "siamman/gradsuite.hpp"
#include "siamman/inference.hpp"
#include "siamman/model.hpp"
#include "siamman/training.hpp"

namespace fs = std::filesystem;
using namespace siamman;

namespace {

int g_failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Tensor rand_t(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.normal();
  return t;
}

// ---- shared desk-scale configuration for the experiments ----

ModelConfig desk_model() {
  ModelConfig mc;
  mc.backbone.channels = 16;
  mc.backbone.search_size = 191;
  return mc;
}

double track_mean_iou(SiamMan& model, const TrackStore& store, const TrackerConfig& tcfg) {
  FrameProvider frames = [&](int i) { return store.frame(0, i); };
  auto states = track_sequence(model, frames, store.length(), store.gt(0, 0), tcfg);
  double s = 0;
  for (int f = 0; f < store.length(); ++f) s += iou(states[(std::size_t)f].box, store.gt(0, f));
  return s / store.length();
}

// ---- criteria ----

void c1_gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  auto results = run_grad_suite("", 10);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0;
  std::string worst_name;
  for (const auto& r : results)
    if (r.max_err > worst) worst = r.max_err, worst_name = r.name;
  const bool pass = all_passed(results) && secs < 300.0;
  report("gradient-suite", pass,
         fmt("%zu checks x 10 seeds, worst %.3e (%s), tolerance 1e-4, %.1f s (< 300 s)",
             results.size(), worst, worst_name.c_str(), secs));
}

void c2_oracle_equivalence() {
  // depth-wise correlation vs a channel-loop direct-convolution oracle
  double worst_x = 0;
  for (int c_n = 1; c_n <= 4; ++c_n)
    for (int dh = 2; dh <= 8; dh += 2)
      for (int th = 1; th <= dh; th += 2) {
        Rng rng(static_cast<std::uint64_t>(c_n * 1000 + dh * 10 + th));
        Tensor det = rand_t({c_n, dh, dh}, rng);
        Tensor tm = rand_t({c_n, th, th}, rng);
        Tensor got = kernels::xcorr_forward(det, tm);
        for (int c = 0; c < c_n; ++c)
          for (int oy = 0; oy + th <= dh; ++oy)
            for (int ox = 0; ox + th <= dh; ++ox) {
              double want = 0;
              for (int ky = 0; ky < th; ++ky)
                for (int kx = 0; kx < th; ++kx)
                  want += det.at3(c, oy + ky, ox + kx) * tm.at3(c, ky, kx);
              worst_x = std::max(worst_x, std::fabs(got.at3(c, oy, ox) - want));
            }
      }

  // anchor matching vs the exhaustive scan
  AnchorConfig acfg;
  AnchorSet set = generate_anchors(25, 25, acfg);
  Rng rng(31337);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Box gt{rng.uniform(-96, 96), rng.uniform(-96, 96), rng.uniform(16, 140),
           rng.uniform(16, 140)};
    MatchLabels got = match_anchors(set, gt, acfg);
    for (std::size_t i = 0; i < set.count(); ++i) {
      const double ov = iou(set.boxes[i], gt);
      AnchorLabel want = ov > 0.6   ? AnchorLabel::positive
                         : ov < 0.3 ? AnchorLabel::negative
                                    : AnchorLabel::ignore;
      if (got.labels[i] != want) ++mismatches;
    }
  }

  // delta codec round trip
  double worst_rt = 0;
  Rng rr(808);
  for (int i = 0; i < 1000; ++i) {
    Box a{rr.uniform(-50, 50), rr.uniform(-50, 50), rr.uniform(5, 80), rr.uniform(5, 80)};
    Box g{rr.uniform(-50, 50), rr.uniform(-50, 50), rr.uniform(5, 80), rr.uniform(5, 80)};
    Box back = decode_delta(a, encode_delta(a, g));
    worst_rt = std::max({worst_rt, std::fabs(back.cx - g.cx), std::fabs(back.cy - g.cy),
                         std::fabs(back.w - g.w), std::fabs(back.h - g.h)});
  }

  const bool pass = worst_x <= 1e-12 && mismatches == 0 && worst_rt <= 1e-12;
  report("oracle-equivalence", pass,
         fmt("xcorr-vs-conv max|diff| %.2e (<=1e-12), match mismatches %d/312500, "
             "encode/decode max err %.2e (<=1e-12, 1000 pairs)",
             worst_x, mismatches, worst_rt));
}

void c3_loss_unit_values() {
  Tape t;
  MatchLabels one;
  one.map_w = one.map_h = one.k = 1;
  one.labels = {AnchorLabel::positive};
  one.deltas.resize(1);
  one.positive_count = 1;
  const double ce = loss_cls(t, t.leaf(Tensor({2, 1, 1})), one)->value.data[0];
  const double want_ce = 0.5 * std::log(2.0);  // -1/2 log 0.5 = 0.34657...

  one.deltas[0] = {0, 0, 0, 0};
  const double l1 =
      loss_reg(t, t.leaf(Tensor::from({4, 1, 1}, {0.1, 0, 0, 0})), one)->value.data[0];

  Tensor target({1, 1}, 1.0);
  const double ce_loc = loss_loc(t, t.leaf(Tensor({2, 1, 1})), target)->value.data[0];

  // Eq. 7 weighted sums: lambda (1,1,1) over parts (1,2,3), and the
  // negative-pair masking that keeps only the classification term
  auto p1 = t.leaf(Tensor::scalar(1)), p2 = t.leaf(Tensor::scalar(2)),
       p3 = t.leaf(Tensor::scalar(3));
  const double six = ops::add(t, ops::add(t, ops::scale(t, p1, 1.0), ops::scale(t, p2, 1.0)),
                              ops::scale(t, p3, 1.0))
                         ->value.data[0];
  AnchorConfig acfg{8, {1.0}, 8};
  LossBreakdown neg = loss_total(t, t.leaf(Tensor({2, 1, 1})), t.leaf(Tensor({4, 1, 1})),
                                 t.leaf(Tensor({2, 1, 1})), all_negative_labels(generate_anchors(1, 1, acfg)),
                                 target, {1, 1, 1}, false);
  const bool masked_ok = neg.total->value.data[0] == neg.cls->value.data[0] &&
                         neg.reg->value.data[0] == 0.0 && neg.loc->value.data[0] == 0.0;

  const bool pass = std::fabs(ce - want_ce) < 1e-6 && std::fabs(l1 - 0.1) < 1e-6 &&
                    std::fabs(ce_loc - want_ce) < 1e-6 && std::fabs(six - 6.0) < 1e-12 &&
                    masked_ok;
  report("loss-unit-values", pass,
         fmt("ce cell %.7f vs 0.3465736 (tol 1e-6), L1 %.7f vs 0.1, weighted sum %g, "
             "negative-pair masking %s",
             ce, l1, six, masked_ok ? "exact" : "BROKEN"));
}

void c4_fusion_correctness() {
  FusionConfig cfg;
  Tensor theta = fuse_scores(Tensor({1, 1, 1}, 1.0), Tensor({1, 1, 1}, 0.0), Tensor({1, 1}, 0.0),
                             Tensor({1, 1, 1}, 1.0), cfg);
  const double v42 = theta.data[0];

  // argmax invariance under positive scaling, 100 random volumes
  Rng rng(4444);
  int stable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor vol({5, 7, 7});
    for (auto& v : vol.data) v = rng.uniform();
    std::size_t best = 0;
    for (std::size_t i = 1; i < vol.data.size(); ++i)
      if (vol.data[i] > vol.data[best]) best = i;
    const double scale = rng.uniform(0.01, 50.0);
    Tensor scaled = vol;
    for (auto& v : scaled.data) v *= scale;
    std::size_t best2 = 0;
    for (std::size_t i = 1; i < scaled.data.size(); ++i)
      if (scaled.data[i] > scaled.data[best2]) best2 = i;
    if (best == best2) ++stable;
  }

  // omega2 = 1 with unit rho: selection equals the appearance argmax
  int agree = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    Tensor u({5, 7, 7}), c({1, 7, 7});
    for (auto& v : u.data) v = rng.uniform();
    for (auto& v : c.data) v = rng.uniform();
    FusionConfig deg = cfg;
    deg.omega2 = 1.0;
    Tensor th = fuse_scores(u, c, cosine_window(7, 7), Tensor({5, 7, 7}, 1.0), deg);
    std::size_t got = 0;
    for (std::size_t i = 1; i < th.data.size(); ++i)
      if (th.data[i] > th.data[got]) got = i;
    std::size_t want = 0;
    double wbest = -1;
    for (std::size_t i = 0; i < th.data.size(); ++i) {
      const double v = cfg.omega1 * u.data[i] + (1 - cfg.omega1) * c.data[i % 49];
      if (v > wbest) wbest = v, want = i;
    }
    if (got == want) ++agree;
  }

  const bool pass = std::fabs(v42 - 0.42) <= 1e-12 && stable == 100 && agree == trials;
  report("fusion-correctness", pass,
         fmt("single-cell value %.15f vs 0.42 (tol 1e-12), argmax scale-invariant %d/100, "
             "omega2=1 degenerate agreement %d/%d",
             v42, stable, agree, trials));
}

void c5_overfit(const std::string& tmp) {
  ModelConfig mc = desk_model();
  SiamMan model(mc, 42);
  SynthConfig sc;
  sc.num_tracks = 8;
  sc.length = 120;
  sc.seed = 9;
  sc.max_speed = 5;
  sc.min_size = 42;
  sc.max_size = 66;
  TrackStore store(sc);
  TrainConfig tc;
  tc.seed = 5;
  tc.batch_size = 2;
  tc.iters_per_epoch = 6;  // phases: 60/60/60/60/90/30 steps, all <= 500
  tc.lr_scale = 1e-2;
  tc.fixed_pairs = 32;

  auto pairs = make_fixed_pairs(store, tc, mc.backbone.exemplar_size, mc.backbone.search_size, 32);
  std::vector<TrainPair> probe(pairs.begin(), pairs.begin() + 8);

  const double initial = evaluate_pairs(model, pairs, tc.lambdas, false);

  // probe the stage-1 objective on a fixed batch over the first 50 steps
  const LossWeights stage1_lw{tc.lambdas.cls, tc.lambdas.reg, 0.0};
  int increases = 0;
  double prev_probe = evaluate_pairs(model, probe, stage1_lw, false);
  double after_stage2 = -1;
  int max_phase_steps = 0, phase_steps = 0, last_stage = 1;
  char last_phase = 'a';
  train_stages(model, store, tc, tmp, [&](const StepRecord& r) {
    if (r.stage != last_stage || r.phase != last_phase) {
      max_phase_steps = std::max(max_phase_steps, phase_steps);
      phase_steps = 0;
      last_stage = r.stage;
      last_phase = r.phase;
    }
    ++phase_steps;
    if (r.stage == 1 && r.phase == 'a' && r.step <= 50) {
      const double p = evaluate_pairs(model, probe, stage1_lw, false);
      if (p > prev_probe) ++increases;
      prev_probe = p;
    }
    if (r.stage == 3 && after_stage2 < 0)
      after_stage2 = evaluate_pairs(model, pairs, tc.lambdas, true);
  });
  max_phase_steps = std::max(max_phase_steps, phase_steps);
  const double final_loss = evaluate_pairs(model, pairs, tc.lambdas, true);
  const double ratio2 = after_stage2 / initial;

  const bool pass = ratio2 < 0.1 && increases <= 5 && max_phase_steps <= 500;
  report("overfit-experiment", pass,
         fmt("32-pair set: initial %.2f, after stage 2 %.2f (ratio %.4f < 0.1), final %.2f; "
             "probe increases in first 50 stage-1 steps: %d (<=5); max phase %d steps (<=500)",
             initial, after_stage2, ratio2, final_loss, increases, max_phase_steps));
}

void c6_tracking(const std::string& tmp) {
  ModelConfig mc = desk_model();
  SynthConfig sc;
  sc.num_tracks = 16;
  sc.length = 120;
  sc.seed = 9;
  sc.max_speed = 5;
  sc.min_size = 42;
  sc.max_size = 66;
  TrackStore store(sc);
  TrainConfig tc;
  tc.seed = 5;
  tc.batch_size = 2;
  tc.iters_per_epoch = 8;
  tc.lr_scale = 1e-2;

  SiamMan full(mc, 42);
  train_stages(full, store, tc, tmp + "/full", nullptr);

  TrainConfig tabl = tc;
  tabl.lambdas = {1, 1, 0};  // localization branch never supervised
  SiamMan abl(mc, 42);
  train_stages(abl, store, tabl, tmp + "/abl", nullptr);

  // held-out constant-velocity sequence, 50 frames
  SynthConfig ec;
  ec.num_tracks = 1;
  ec.length = 50;
  ec.seed = 777;
  ec.min_size = 46;
  ec.max_size = 60;
  TrackStore ev = TrackStore::constant_velocity(ec, 2.4, 1.7);
  TrackerConfig full_cfg;
  const double held_out = track_mean_iou(full, ev, full_cfg);

  // fast-motion suite: the ablated model replaces c with u in the fusion
  TrackerConfig abl_cfg;
  abl_cfg.use_loc_in_fusion = false;
  double sum_full = 0, sum_abl = 0;
  const int n_seq = 6;
  std::string per_seq;
  for (int i = 0; i < n_seq; ++i) {
    SynthConfig fc;
    fc.num_tracks = 1;
    fc.length = 30;
    fc.seed = 1000 + 31 * i;
    fc.frame_w = 448;
    fc.frame_h = 448;
    fc.min_size = 46;
    fc.max_size = 60;
    const double vx = (i % 2 ? -1 : 1) * (8.0 + i);
    const double vy = (i % 3 ? 1 : -1) * (4.0 + 0.5 * i);
    TrackStore fsq = TrackStore::constant_velocity(fc, vx, vy);
    const double a = track_mean_iou(full, fsq, full_cfg);
    const double b = track_mean_iou(abl, fsq, abl_cfg);
    sum_full += a / n_seq;
    sum_abl += b / n_seq;
    per_seq += fmt("%.3f/%.3f ", a, b);
  }

  // static sequence: identical frames with the target centered must not
  // drift by more than one stride cell over 20 frames
  SynthConfig st;
  st.num_tracks = 1;
  st.length = 20;
  st.seed = 4242;
  st.min_size = 48;
  st.max_size = 56;
  TrackStore stat = TrackStore::constant_velocity(st, 0.0, 0.0);
  FrameProvider sframes = [&](int) { return stat.frame(0, 0); };
  auto sstates = track_sequence(full, sframes, 20, stat.gt(0, 0), full_cfg);
  const double drift = std::hypot(sstates.back().box.cx - stat.gt(0, 0).cx,
                                  sstates.back().box.cy - stat.gt(0, 0).cy);

  const bool pass = held_out >= 0.5 && sum_full > sum_abl && drift < 8.0;
  report("end-to-end-tracking", pass,
         fmt("held-out 50-frame mean IoU %.4f (>=0.5); fast-motion suite full %.4f > ablated "
             "%.4f [per-seq full/abl: %s]; static drift %.2f px (<8)",
             held_out, sum_full, sum_abl, per_seq.c_str(), drift));
}

void c7_metric_scorer() {
  Box b{50, 50, 20, 20};
  Trajectory gt(30, FrameBox{true, b, 1.0});

  VotResult v = vot_accuracy_robustness(gt, gt);
  OtbResult o = success_precision(gt, gt);
  LtbResult l = f_score_longterm(gt, gt);
  const bool perfect_ok = v.accuracy == 1.0 && v.failures == 0 &&
                          o.success_auc == 100.0 / 101.0 && o.precision_at_20 == 1.0 &&
                          l.max_f == 1.0;

  // hand-enumerated mixed fixtures
  // constant IoU 0.5 -> success AUC exactly 50/101
  Trajectory half(30, FrameBox{true, Box{50 + 20.0 / 3.0, 50, 20, 20}, 1.0});
  const double auc_half = success_precision(half, gt).success_auc;

  // 4-frame long-term case: max F = 0.8 at threshold 0.8
  Trajectory gt4 = {{true, b, 1}, {true, b, 1}, {true, b, 1}, {false, {}, 0}};
  Trajectory tr4 = {{true, b, 0.9}, {true, b, 0.8}, {true, Box{500, 500, 20, 20}, 0.7},
                    {false, {}, 0.0}};
  const double f4 = f_score_longterm(tr4, gt4).max_f;

  // vot hand trace: one failure at frame 12, accuracy = mean of the five
  // active out-of-burn-in frames (all the same overlap)
  Trajectory one(30, FrameBox{true, Box{53, 50, 20, 20}, 1.0});
  one[12] = {true, Box{500, 500, 20, 20}, 1.0};
  VotResult mid = vot_accuracy_robustness(one, gt);
  const double ov = iou(Box{53, 50, 20, 20}, b);

  const bool mixed_ok = std::fabs(auc_half - 50.0 / 101.0) <= 1e-12 &&
                        std::fabs(f4 - 0.8) <= 1e-12 && mid.failures == 1 &&
                        std::fabs(mid.accuracy - ov) <= 1e-12;

  const bool pass = perfect_ok && mixed_ok;
  report("metric-scorer", pass,
         fmt("perfect fixtures (acc %.3f fail %d auc %.6f=100/101 prec %.3f F %.3f); mixed: "
             "auc %.6f=50/101, maxF %.3f=0.8, trace acc err %.1e",
             v.accuracy, v.failures, o.success_auc, o.precision_at_20, l.max_f, auc_half, f4,
             std::fabs(mid.accuracy - ov)));
}

// ---- CLI determinism and byte stability ----

std::string cli_path() {
  if (const char* p = std::getenv("SIAMMAN_CLI")) return p;
  return "./siamman";
}

int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd = cli_path() + " " + args + " > " + log + " 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void c8_determinism(const std::string& tmp) {
  if (!fs::exists(cli_path())) {
    report("cli-determinism", false, "CLI binary not found at " + cli_path());
    return;
  }
  // tiny but complete config
  RunConfig cfg;
  cfg.seed = 11;
  cfg.model.backbone.channels = 8;
  cfg.model.backbone.search_size = 191;
  cfg.synth.num_tracks = 2;
  cfg.synth.length = 110;
  cfg.synth.frame_w = 160;
  cfg.synth.frame_h = 160;
  cfg.synth.min_size = 30;
  cfg.synth.max_size = 40;
  cfg.synth.seed = 3;
  cfg.train.seed = 3;
  cfg.train.batch_size = 1;
  cfg.train.iters_per_epoch = 1;
  cfg.train.s1a = cfg.train.s1b = cfg.train.s2a = cfg.train.s2b = cfg.train.s3a = cfg.train.s3b = 1;
  cfg.train.lr_scale = 1e-2;
  const std::string cfg_path = tmp + "/det.cfg";
  {
    std::ofstream os(cfg_path);
    os << serialize_config(cfg);
  }

  bool ok = true;
  std::string detail;

  // train twice
  for (const char* run : {"r1", "r2"}) {
    const int rc = run_cli("train --config " + cfg_path + " --out " + tmp + "/" + run,
                           tmp + "/train_" + run + ".log");
    if (rc != 0) {
      ok = false;
      detail += fmt("train %s rc=%d ", run, rc);
    }
  }
  if (ok) {
    for (const char* f : {"/final.ckpt", "/stage1.ckpt", "/train_log.jsonl"}) {
      if (slurp(tmp + "/r1" + f) != slurp(tmp + "/r2" + f) || slurp(tmp + "/r1" + f).empty()) {
        ok = false;
        detail += fmt("train outputs differ at %s ", f);
      }
    }
    if (ok) detail += "train bitwise-identical; ";
  }

  // synthesize a sequence, track it twice with the trained checkpoint
  if (ok) {
    int rc = run_cli("synth --config " + cfg_path + " --out " + tmp + "/seq --velocity 1.2,0.8",
                     tmp + "/synth.log");
    if (rc != 0) ok = false, detail += fmt("synth rc=%d ", rc);
  }
  if (ok) {
    Trajectory gt = load_trajectory(tmp + "/seq/groundtruth.csv");
    const Box ib = gt[0].box;
    const std::string box_arg = fmt("%.3f,%.3f,%.3f,%.3f", ib.cx, ib.cy, ib.w, ib.h);
    for (const char* run : {"t1", "t2"}) {
      const int rc = run_cli("track --config " + cfg_path + " --checkpoint " + tmp +
                                 "/r1/final.ckpt --sequence " + tmp + "/seq --init-box " +
                                 box_arg + " --out " + tmp + "/" + run + ".csv",
                             tmp + "/track_" + std::string(run) + ".log");
      if (rc != 0) ok = false, detail += fmt("track %s rc=%d ", run, rc);
    }
    if (ok) {
      const std::string t1 = slurp(tmp + "/t1.csv");
      if (t1 != slurp(tmp + "/t2.csv") || t1.empty()) {
        ok = false;
        detail += "trajectories differ ";
      } else {
        detail += fmt("track bitwise-identical (%zu bytes); ", t1.size());
      }
    }
  }

  // scorer byte stability across two CLI invocations
  if (ok) {
    for (const char* run : {"s1", "s2"}) {
      const int rc = run_cli("score --protocol otb --traj " + tmp + "/t1.csv --gt " + tmp +
                                 "/seq/groundtruth.csv --out " + tmp + "/" + run + ".json",
                             tmp + "/score_" + std::string(run) + ".log");
      if (rc != 0) ok = false, detail += fmt("score %s rc=%d ", run, rc);
    }
    if (ok) {
      const bool same = slurp(tmp + "/s1.json") == slurp(tmp + "/s2.json") &&
                        slurp(tmp + "/s1.success.csv") == slurp(tmp + "/s2.success.csv");
      if (!same) ok = false, detail += "score outputs differ ";
      else detail += "score byte-stable";
    }
  }

  report("cli-determinism", ok, detail);
}

}  // namespace

int main() {
  set_checked_mode(true);
  const std::string tmp = (fs::temp_directory_path() / "siamman_accept").string();
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  c1_gradient_suite();
  c2_oracle_equivalence();
  c3_loss_unit_values();
  c4_fusion_correctness();
  c7_metric_scorer();
  c8_determinism(tmp);
  c5_overfit(tmp + "/overfit");
  c6_tracking(tmp + "/tracking");

  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
