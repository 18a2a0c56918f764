#pragma once

#include <string>

#include "siamman/inference.hpp"
#include "siamman/synth.hpp"
#include "siamman/training.hpp"

namespace siamman {

// Everything the CLI can run is described by one flat key = value file;
// see serialize_config for the full key set. Parsing is strict: unknown
// keys are errors, and the defaults are the documented desk-scale values.
struct RunConfig {
  std::uint64_t seed = 1;
  ModelConfig model;
  AnchorConfig anchors;
  FusionConfig fusion;
  bool use_loc_in_fusion = true;
  TrainConfig train;
  SynthConfig synth;
  int eao_lo = 10;
  int eao_hi = 50;

  TrackerConfig tracker() const { return {anchors, fusion, use_loc_in_fusion}; }
};

RunConfig parse_config_text(const std::string& text, const std::string& name = "<config>");
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace siamman
