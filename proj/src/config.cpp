#include "siamman/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace siamman {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_ratios(const std::vector<double>& rs) {
  std::string out;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(rs[i]);
  }
  return out;
}

struct Binding {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

int parse_int(const std::string& v) {
  std::size_t pos = 0;
  int i = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long i = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true/false");
}

#define BIND_D(key, expr)                                           \
  {key, {[](const RunConfig& c) { return fmt_double(c.expr); },     \
         [](RunConfig& c, const std::string& v) { c.expr = parse_double(v); }}}
#define BIND_I(key, expr)                                           \
  {key, {[](const RunConfig& c) { return std::to_string(c.expr); }, \
         [](RunConfig& c, const std::string& v) { c.expr = parse_int(v); }}}
#define BIND_B(key, expr)                                                   \
  {key, {[](const RunConfig& c) { return c.expr ? "true" : "false"; },      \
         [](RunConfig& c, const std::string& v) { c.expr = parse_bool(v); }}}
#define BIND_U(key, expr)                                           \
  {key, {[](const RunConfig& c) { return std::to_string(c.expr); }, \
         [](RunConfig& c, const std::string& v) { c.expr = parse_u64(v); }}}

// ordered: serialization emits keys in this sequence
const std::vector<std::pair<std::string, Binding>>& bindings() {
  static const std::vector<std::pair<std::string, Binding>> b = {
      BIND_U("seed", seed),
      BIND_I("model.channels", model.backbone.channels),
      BIND_I("model.levels", model.backbone.levels),
      BIND_I("model.exemplar_size", model.backbone.exemplar_size),
      BIND_I("model.search_size", model.backbone.search_size),
      BIND_I("model.k", model.k),
      BIND_I("model.gc_ratio", model.gc_ratio),
      BIND_I("model.aspp_rate_a", model.aspp_rate_a),
      BIND_I("model.aspp_rate_b", model.aspp_rate_b),
      BIND_I("model.attn_channels", model.attn_channels),
      BIND_B("model.sigmoid_attention", model.sigmoid_attention),
      BIND_I("anchors.stride", anchors.stride),
      {"anchors.ratios",
       {[](const RunConfig& c) { return fmt_ratios(c.anchors.ratios); },
        [](RunConfig& c, const std::string& v) {
          std::vector<double> rs;
          std::istringstream ss(v);
          std::string tok;
          while (std::getline(ss, tok, ',')) rs.push_back(parse_double(tok));
          if (rs.empty()) throw std::invalid_argument("empty ratio list");
          c.anchors.ratios = rs;
        }}},
      BIND_D("anchors.scale", anchors.scale),
      BIND_D("anchors.pos_thresh", anchors.pos_thresh),
      BIND_D("anchors.neg_thresh", anchors.neg_thresh),
      BIND_B("anchors.paper_literal_delta", anchors.paper_literal_delta),
      BIND_D("fusion.omega1", fusion.omega1),
      BIND_D("fusion.omega2", fusion.omega2),
      BIND_D("fusion.k_pen", fusion.k_pen),
      BIND_D("fusion.eta0", fusion.eta0),
      BIND_B("fusion.use_loc", use_loc_in_fusion),
      BIND_D("train.momentum", train.momentum),
      BIND_D("train.weight_decay", train.weight_decay),
      BIND_D("train.lr_initial", train.lr_initial),
      BIND_D("train.lr_peak", train.lr_peak),
      BIND_D("train.lr_final", train.lr_final),
      BIND_I("train.warmup_epochs", train.warmup_epochs),
      BIND_I("train.total_epochs", train.total_epochs),
      BIND_D("train.lr_scale", train.lr_scale),
      BIND_D("train.lambda_cls", train.lambdas.cls),
      BIND_D("train.lambda_reg", train.lambdas.reg),
      BIND_D("train.lambda_loc", train.lambdas.loc),
      BIND_I("train.iters_per_epoch", train.iters_per_epoch),
      BIND_I("train.batch_size", train.batch_size),
      BIND_D("train.pos_fraction", train.pos_fraction),
      BIND_I("train.max_frame_interval", train.max_frame_interval),
      BIND_D("train.shift_frac", train.shift_frac),
      BIND_D("train.scale_jitter", train.scale_jitter),
      BIND_D("train.aug_flip", train.augment.p_flip),
      BIND_D("train.aug_blur", train.augment.p_blur),
      BIND_D("train.aug_rescale", train.augment.p_rescale),
      BIND_D("train.aug_rotate", train.augment.p_rotate),
      BIND_D("train.aug_gray", train.augment.p_gray),
      BIND_D("train.aug_max_rotate_deg", train.augment.max_rotate_deg),
      BIND_D("train.aug_rescale_lo", train.augment.rescale_lo),
      BIND_D("train.aug_rescale_hi", train.augment.rescale_hi),
      BIND_I("train.stage1_epochs_a", train.s1a),
      BIND_I("train.stage1_epochs_b", train.s1b),
      BIND_I("train.stage2_epochs_a", train.s2a),
      BIND_I("train.stage2_epochs_b", train.s2b),
      BIND_I("train.stage3_epochs_a", train.s3a),
      BIND_I("train.stage3_epochs_b", train.s3b),
      BIND_I("train.fixed_pairs", train.fixed_pairs),
      BIND_U("train.seed", train.seed),
      BIND_I("synth.frame_w", synth.frame_w),
      BIND_I("synth.frame_h", synth.frame_h),
      BIND_I("synth.length", synth.length),
      BIND_I("synth.num_tracks", synth.num_tracks),
      BIND_D("synth.min_size", synth.min_size),
      BIND_D("synth.max_size", synth.max_size),
      BIND_D("synth.max_speed", synth.max_speed),
      BIND_D("synth.scale_drift", synth.scale_drift),
      BIND_B("synth.occluders", synth.occluders),
      BIND_U("synth.seed", synth.seed),
      BIND_I("eval.eao_lo", eao_lo),
      BIND_I("eval.eao_hi", eao_hi),
  };
  return b;
}

#undef BIND_D
#undef BIND_I
#undef BIND_B
#undef BIND_U

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& name) {
  RunConfig cfg;  // defaults
  std::map<std::string, const Binding*> lookup;
  for (const auto& [key, bind] : bindings()) lookup[key] = &bind;

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    auto it = lookup.find(key);
    if (it == lookup.end())
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      it->second->set(cfg, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": bad value for '" + key +
                               "': " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, bind] : bindings()) os << key << " = " << bind.get(cfg) << "\n";
  return os.str();
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace siamman
