#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "siamman/tensor.hpp"

namespace siamman {

// One value in a recorded computation. grad is allocated on the first
// accumulation during the backward sweep; grad_touched distinguishes "zero
// gradient" from "never reached", which the detached-subgraph check needs.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_touched = false;
  // Propagates the given upstream gradient (this node's grad) into the
  // parents captured by the closure. Empty for leaves.
  std::function<void(const Tensor&)> backprop;
};

using NodeRef = std::shared_ptr<Node>;

void accumulate_grad(Node& n, const Tensor& g);

// Wengert list: ops execute eagerly, so creation order is a topological
// order and backward is a single reverse sweep. A tape is confined to one
// logical execution context; concurrent recording into one tape is not
// supported.
class Tape {
 public:
  NodeRef leaf(Tensor value, bool requires_grad = false);
  NodeRef record(Tensor value, std::function<void(const Tensor&)> backprop);
  // root must hold exactly one element; seeds its grad with 1
  void backward(const NodeRef& root);
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<NodeRef> nodes_;
};

// Closure maps the given inputs to a scalar node.
using ScalarClosure = std::function<NodeRef(Tape&, const std::vector<NodeRef>&)>;

// Max over all input coordinates of
//   |analytic - central difference| / max(1, |analytic|, |numeric|).
// Throws if the closure output is not a scalar.
double grad_check(const ScalarClosure& f, const std::vector<Tensor>& inputs, double eps = 1e-5);

}  // namespace siamman
