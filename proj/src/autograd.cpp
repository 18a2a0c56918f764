#include "siamman/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace siamman {

void accumulate_grad(Node& n, const Tensor& g) {
  if (!g.same_shape(n.value))
    throw std::logic_error("gradient shape " + shape_str(g.shape) + " does not match value shape " +
                           shape_str(n.value.shape));
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
  for (std::size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
  n.grad_touched = true;
}

NodeRef Tape::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  nodes_.push_back(n);
  return n;
}

NodeRef Tape::record(Tensor value, std::function<void(const Tensor&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->backprop = std::move(backprop);
  nodes_.push_back(n);
  return n;
}

void Tape::backward(const NodeRef& root) {
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: root must be scalar, got " +
                                shape_str(root->value.shape));
  accumulate_grad(*root, Tensor::from(root->value.shape, {1.0}));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad_touched && n.backprop) n.backprop(n.grad);
  }
}

double grad_check(const ScalarClosure& f, const std::vector<Tensor>& inputs, double eps) {
  if (eps <= 0) throw std::invalid_argument("grad_check: eps must be positive");

  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<NodeRef> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(tape.leaf(x, false));
    NodeRef out = f(tape, leaves);
    if (out->value.size() != 1)
      throw std::invalid_argument("grad_check: closure output must be scalar");
    return out->value.data[0];
  };

  // analytic gradients
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<NodeRef> leaves;
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x, true));
    NodeRef out = f(tape, leaves);
    if (out->value.size() != 1)
      throw std::invalid_argument("grad_check: closure output must be scalar");
    tape.backward(out);
    for (const auto& l : leaves)
      analytic.push_back(l->grad.data.empty() ? Tensor(l->value.shape) : l->grad);
  }

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].data.size(); ++i) {
      const double saved = probe[t].data[i];
      probe[t].data[i] = saved + eps;
      const double fp = eval(probe);
      probe[t].data[i] = saved - eps;
      const double fm = eval(probe);
      probe[t].data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[t].data[i];
      const double err = std::fabs(a - numeric) /
                         std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace siamman
