#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "siamman/autograd.hpp"
#include "siamman/tensor.hpp"

namespace siamman {

enum class ParamGroup { backbone, cls_head, reg_head, loc_head, attention };

struct Param {
  std::string name;
  Tensor value;
  Tensor velocity;  // SGD momentum buffer, same shape as value
  ParamGroup group;
};

// Named parameter tensors in registration order. Order is part of the
// contract: checkpoints and update loops iterate it deterministically.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init, ParamGroup group);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }

  void zero_velocities();

  // Checkpoint container: magic "SMC1", u64 entry count, then per entry a
  // u64 name length, the name bytes, and the tensor in the SMT1 format.
  // Loading is strict: names and shapes must match this store exactly.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Leaf cache for one forward pass: the same Param used in several places
// (siamese weight sharing) must map to a single tape leaf so gradients
// accumulate in one node.
class ParamLeaves {
 public:
  explicit ParamLeaves(Tape& tape) : tape_(tape) {}
  NodeRef operator()(Param& p);
  const std::unordered_map<const Param*, NodeRef>& map() const { return leaves_; }

 private:
  Tape& tape_;
  std::unordered_map<const Param*, NodeRef> leaves_;
};

}  // namespace siamman
