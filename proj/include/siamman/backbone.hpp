#pragma once

#include <array>
#include <vector>

#include "siamman/ops.hpp"
#include "siamman/params.hpp"
#include "siamman/rng.hpp"

namespace siamman {

struct BackboneConfig {
  int channels = 32;
  int levels = 3;
  int exemplar_size = 127;
  int search_size = 255;
  std::uint64_t seed = 1;
};

// output side of the stride-8 trunk (three 3x3 stride-2 valid convs)
int stride_chain_out(int in);

// throws unless exemplar < search, the exemplar maps to the 15x15 pre-crop
// template, and the search map leaves room for the 7x7 crop
void validate_backbone_config(const BackboneConfig& cfg);

// Per-level feature pair after the 1x1 channel reduction; the template side
// is center-cropped from 15x15 to 7x7.
struct PyramidLevel {
  NodeRef templ;  // [C,7,7]
  NodeRef det;    // [C,Hd,Wd]
};

// Node handles for one forward pass; built from a ParamStore via a
// ParamLeaves cache so the template and detection paths share leaves.
struct BackboneNodes {
  std::array<NodeRef, 3> trunk_w, trunk_b;
  std::vector<NodeRef> tap_w, tap_b;        // per level, 3x3 same-padding
  std::vector<NodeRef> reduce_w, reduce_b;  // per level, 1x1
  std::vector<std::array<NodeRef, 3>> split_w;  // per level x {cls,reg,loc}, bias-free
};

void register_backbone_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng);
BackboneNodes backbone_nodes(ParamLeaves& leaves, ParamStore& store, const BackboneConfig& cfg);

// Applies the shared trunk and per-level taps to both patches. Weight
// sharing is structural: the same leaf nodes feed both paths.
std::vector<PyramidLevel> extract_pyramid(Tape& t, NodeRef templ_patch, NodeRef det_patch,
                                          const BackboneConfig& cfg, const BackboneNodes& p);

// Three independent bias-free 3x3 stride-1 same-padding convolutions,
// channel count preserved: {cls, reg, loc} views of one feature map.
std::array<NodeRef, 3> branch_split(Tape& t, NodeRef feat, const std::array<NodeRef, 3>& split_w);

}  // namespace siamman
