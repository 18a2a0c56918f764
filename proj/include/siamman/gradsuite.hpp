#pragma once

#include <string>
#include <vector>

namespace siamman {

struct GradCheckResult {
  std::string name;
  double max_err = 0;
  double tol = 1e-4;
  int seeds = 0;
  bool pass = false;
};

// Finite-difference verification of every differentiable op and of the
// composed heads, losses and attention path. `filter` selects checks by
// substring; empty runs everything. Throws if the filter matches nothing.
// `inject_fault` adds a fixture with a deliberate sign error in its
// backward, used to verify that the harness itself detects bad gradients.
std::vector<GradCheckResult> run_grad_suite(const std::string& filter, int seeds = 10,
                                            bool inject_fault = false);

bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace siamman
