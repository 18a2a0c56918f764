// siamman: desk-scale siamese tracker with classification, regression and
// center-localization heads. Subcommands: gradcheck, train, track, score,
// synth. Exit codes: 0 success, 1 verification failure, 2 usage/config error.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "siamman/config.hpp"
#include "siamman/evaluation.hpp"
#include "siamman/gradsuite.hpp"
#include "siamman/image.hpp"
#include "siamman/inference.hpp"
#include "siamman/model.hpp"
#include "siamman/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace siamman;

namespace {

RunConfig load_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_config(path);
}

int cmd_gradcheck(const std::string& config_path, const std::string& filter, int seeds,
                  bool inject_fault) {
  (void)config_path;
  auto results = run_grad_suite(filter, seeds, inject_fault);
  std::printf("%-24s %-12s %-8s %s\n", "op", "max_rel_err", "seeds", "status");
  for (const auto& r : results)
    std::printf("%-24s %-12.3e %-8d %s\n", r.name.c_str(), r.max_err, r.seeds,
                r.pass ? "ok" : "FAIL");
  if (!all_passed(results)) {
    std::printf("gradient check FAILED\n");
    return 1;
  }
  std::printf("all gradient checks passed (tolerance 1e-4)\n");
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string log_path = out_dir + "/train_log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("output path not writable: " + log_path);

  SiamMan model(cfg.model, cfg.seed);
  TrackStore store(cfg.synth);
  TrainConfig tc = cfg.train;
  tc.anchors = cfg.anchors;

  train_stages(model, store, tc, out_dir, [&](const StepRecord& r) {
    json rec;
    rec["step"] = r.step;
    rec["stage"] = r.stage;
    rec["phase"] = std::string(1, r.phase);
    rec["epoch"] = r.epoch;
    rec["lr"] = r.lr;
    rec["loss_total"] = r.total;
    rec["loss_cls"] = r.cls;
    rec["loss_reg"] = r.reg;
    rec["loss_loc"] = r.loc;
    log << rec.dump() << "\n";
  });
  log.close();
  std::printf("training done; checkpoints and %s written to %s\n", "train_log.jsonl",
              out_dir.c_str());
  return 0;
}

Box parse_box_arg(const std::string& s) {
  double v[4];
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4)
    throw CLI::ValidationError("--init-box", "expected cx,cy,w,h");
  if (v[2] <= 0 || v[3] <= 0) throw CLI::ValidationError("--init-box", "w and h must be positive");
  return Box{v[0], v[1], v[2], v[3]};
}

int cmd_track(const RunConfig& cfg, const std::string& checkpoint, const std::string& seq_dir,
              const Box& init_box, const std::string& out_path) {
  SiamMan model(cfg.model, cfg.seed);
  if (!checkpoint.empty()) model.params().load(checkpoint);

  const auto frame_paths = list_sequence_frames(seq_dir);
  if (frame_paths.empty()) throw std::runtime_error("no frames found in " + seq_dir);
  FrameProvider frames = [&](int i) {
    try {
      return read_ppm(frame_paths.at(static_cast<std::size_t>(i)));
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(i) + ": " + e.what());
    }
  };

  auto states = track_sequence(model, frames, static_cast<int>(frame_paths.size()), init_box,
                               cfg.tracker());

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write trajectory: " + out_path);
  Trajectory traj;
  for (const auto& st : states) traj.push_back({true, st.box, st.score});
  write_trajectory(os, traj, true);
  os.close();

  json sidecar;
  sidecar["seed"] = cfg.seed;
  sidecar["checkpoint"] = checkpoint;
  sidecar["sequence"] = seq_dir;
  sidecar["frames"] = frame_paths.size();
  sidecar["init_box"] = {init_box.cx, init_box.cy, init_box.w, init_box.h};
  sidecar["config"] = serialize_config(cfg);
  std::ofstream sc(out_path + ".json");
  sc << sidecar.dump(2) << "\n";
  std::printf("tracked %zu frames -> %s\n", frame_paths.size(), out_path.c_str());
  return 0;
}

json score_one(const RunConfig& cfg, const std::string& protocol, const std::string& traj_path,
               const std::string& gt_path, const std::string& out_base) {
  Trajectory traj = load_trajectory(traj_path);
  Trajectory gt = load_trajectory(gt_path);
  json rep;
  rep["protocol"] = protocol;
  rep["trajectory"] = traj_path;
  rep["ground_truth"] = gt_path;
  if (protocol == "vot") {
    VotResult v = vot_accuracy_robustness(traj, gt);
    rep["accuracy"] = v.accuracy;
    rep["robustness"] = v.failures;
    rep["eao_lite"] = eao_lite({overlap_curve(traj, gt)}, cfg.eao_lo, cfg.eao_hi);
    rep["resets"] = v.reset_frames;
  } else if (protocol == "otb") {
    OtbResult o = success_precision(traj, gt);
    rep["success_auc"] = o.success_auc;
    rep["precision_at_20"] = o.precision_at_20;
    if (!out_base.empty()) {
      std::ofstream sc(out_base + ".success.csv");
      sc << "threshold,success\n";
      char buf[80];
      for (int i = 0; i < kSuccessGrid; ++i) {
        std::snprintf(buf, sizeof buf, "%.2f,%.17g\n", i / double(kSuccessGrid - 1),
                      o.success_curve[static_cast<std::size_t>(i)]);
        sc << buf;
      }
      std::ofstream pc(out_base + ".precision.csv");
      pc << "distance_px,precision\n";
      for (int d = 0; d <= 50; ++d) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", d, o.precision_curve[static_cast<std::size_t>(d)]);
        pc << buf;
      }
    }
  } else if (protocol == "ltb") {
    LtbResult l = f_score_longterm(traj, gt);
    rep["max_f"] = l.max_f;
    rep["best_threshold"] = l.best_threshold;
    if (!out_base.empty()) {
      std::ofstream pr(out_base + ".pr.csv");
      pr << "threshold,precision,recall,f\n";
      char buf[120];
      for (const auto& p : l.curve) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.threshold, p.precision,
                      p.recall, p.f);
        pr << buf;
      }
    }
  } else {
    throw std::runtime_error("unknown protocol: " + protocol);
  }
  return rep;
}

int scoring_threads() {
  if (const char* env = std::getenv("SIAMMAN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int cmd_score(const RunConfig& cfg, const std::string& protocol, const std::string& traj_path,
              const std::string& gt_path, const std::string& out_path) {
  json report;
  if (fs::is_directory(traj_path)) {
    // fan out over <name>.csv pairs present in both directories
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& e : fs::directory_iterator(traj_path)) {
      if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
      const std::string gt_file = (fs::path(gt_path) / e.path().filename()).string();
      if (fs::exists(gt_file)) pairs.emplace_back(e.path().string(), gt_file);
    }
    std::sort(pairs.begin(), pairs.end());
    if (pairs.empty()) throw std::runtime_error("no matching sequence files to score");
    std::vector<json> results(pairs.size());
    std::vector<std::string> errors(pairs.size());
    const int workers = std::min<int>(scoring_threads(), static_cast<int>(pairs.size()));
    std::vector<std::thread> threads;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w)
      threads.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
          try {
            results[i] = score_one(cfg, protocol, pairs[i].first, pairs[i].second, "");
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        }
      });
    for (auto& t : threads) t.join();
    for (const auto& err : errors)
      if (!err.empty()) throw std::runtime_error(err);
    report["protocol"] = protocol;
    report["sequences"] = json::array();
    double mean_primary = 0;
    for (const auto& r : results) {
      report["sequences"].push_back(r);
      mean_primary += protocol == "vot"   ? r["accuracy"].get<double>()
                      : protocol == "otb" ? r["success_auc"].get<double>()
                                          : r["max_f"].get<double>();
    }
    report["mean_primary_metric"] = mean_primary / static_cast<double>(results.size());
  } else {
    const std::string base = out_path.empty() ? "" : out_path;
    report = score_one(cfg, protocol, traj_path, gt_path, base);
  }
  const std::string text = report.dump(2) + "\n";
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write report: " + out_path);
    os << text;
  }
  std::cout << text;
  return 0;
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir, int track,
              const std::string& velocity) {
  fs::create_directories(out_dir);
  TrackStore store = [&]() {
    if (!velocity.empty()) {
      double vx, vy;
      if (std::sscanf(velocity.c_str(), "%lf,%lf", &vx, &vy) != 2)
        throw CLI::ValidationError("--velocity", "expected vx,vy");
      return TrackStore::constant_velocity(cfg.synth, vx, vy);
    }
    return TrackStore(cfg.synth);
  }();
  if (track < 0 || track >= store.num_tracks())
    throw std::runtime_error("track index out of range");
  Trajectory gt;
  char name[64];
  for (int t = 0; t < store.length(); ++t) {
    std::snprintf(name, sizeof name, "/frame_%06d.ppm", t);
    write_ppm(out_dir + name, store.frame(track, t));
    gt.push_back({true, store.gt(track, t), 1.0});
  }
  std::ofstream os(out_dir + "/groundtruth.csv");
  write_trajectory(os, gt, false);
  std::printf("wrote %d frames and groundtruth.csv to %s\n", store.length(), out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"siamman: siamese tracker with a center-localization branch (desk scale)"};
  app.require_subcommand(1);

  std::string config_path, out_path, checkpoint, seq_dir, filter, protocol, traj_path, gt_path;
  std::string init_box_str, velocity;
  int seeds = 10;
  int track_index = 0;
  bool inject_fault = false;
  std::uint64_t seed_override = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file (key = value)");
    sub->add_option_function<std::uint64_t>(
           "--seed", [&](const std::uint64_t& s) { seed_override = s; seed_set = true; },
           "seed override");
  };

  CLI::App* gc = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
  add_common(gc);
  gc->add_option("--filter", filter, "run only checks whose name contains this substring");
  gc->add_option("--seeds", seeds, "random seeds per check")->check(CLI::PositiveNumber);
  gc->add_flag("--inject-fault", inject_fault)->group("");

  CLI::App* tr = app.add_subcommand("train", "run the three-stage desk training schedule");
  add_common(tr);
  tr->add_option("--out", out_path, "output directory for checkpoints and the log")->required();

  CLI::App* tk = app.add_subcommand("track", "track a sequence directory of PPM frames");
  add_common(tk);
  tk->add_option("--checkpoint", checkpoint, "model checkpoint");
  tk->add_option("--sequence", seq_dir, "sequence directory")->required();
  tk->add_option("--init-box", init_box_str, "initial box as cx,cy,w,h (pixels)")->required();
  tk->add_option("--out", out_path, "trajectory CSV path")->required();

  CLI::App* sc = app.add_subcommand("score", "score a trajectory against ground truth");
  add_common(sc);
  sc->add_option("--protocol", protocol, "vot | otb | ltb")
      ->required()
      ->check(CLI::IsMember({"vot", "otb", "ltb"}));
  sc->add_option("--traj", traj_path, "trajectory file or directory")->required();
  sc->add_option("--gt", gt_path, "ground-truth file or directory")->required();
  sc->add_option("--out", out_path, "JSON report path (CSV curves written alongside)");

  CLI::App* sy = app.add_subcommand("synth", "emit a synthetic sequence with ground truth");
  add_common(sy);
  sy->add_option("--out", out_path, "output directory")->required();
  sy->add_option("--track", track_index, "track index within the store");
  sy->add_option("--velocity", velocity, "constant velocity vx,vy instead of a random track");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg = load_or_default(config_path);
    if (seed_set) {
      cfg.seed = seed_override;
      cfg.synth.seed = seed_override * 1000003 + 7;
      cfg.train.seed = seed_override;
    }
    if (gc->parsed()) return cmd_gradcheck(config_path, filter, seeds, inject_fault);
    if (tr->parsed()) return cmd_train(cfg, out_path);
    if (tk->parsed()) return cmd_track(cfg, checkpoint, seq_dir, parse_box_arg(init_box_str),
                                       out_path);
    if (sc->parsed()) return cmd_score(cfg, protocol, traj_path, gt_path, out_path);
    if (sy->parsed()) return cmd_synth(cfg, out_path, track_index, velocity);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
