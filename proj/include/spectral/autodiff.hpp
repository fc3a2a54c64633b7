#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spectral/tensor.hpp"

namespace spectral {

/// One node of a reverse-mode differentiation graph. Graphs are built
/// per training step and discarded after backward(). Parent links only,
/// so shared_ptr ownership is acyclic.
struct Var {
  Tensor value;
  Tensor grad;  // allocated lazily; empty unless requires_grad
  bool requires_grad = false;
  bool trainable = false;  // set for ParameterSet leaves only
  std::string name;
  std::vector<std::shared_ptr<Var>> parents;
  // Reads self.grad, accumulates into parents' grads.
  std::function<void(Var&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
  }
  double scalar() const { return value[0]; }
};

using VarPtr = std::shared_ptr<Var>;

VarPtr make_leaf(Tensor value, bool requires_grad = false);
VarPtr make_const(Tensor value);

/// Reverse pass from a scalar root: seeds d(root)/d(root) = 1 and walks
/// the graph in reverse topological order.
void backward(const VarPtr& root);

/// Named parameter tensors with gradient buffers and trainable flags.
/// Iteration order is creation order, which keeps optimizer updates and
/// checkpoints deterministic.
class ParameterSet {
 public:
  VarPtr create(const std::string& name, Tensor init, bool trainable = true);
  VarPtr find(const std::string& name) const;  // nullptr if absent
  VarPtr at(const std::string& name) const;    // throws if absent

  const std::vector<VarPtr>& entries() const { return entries_; }
  std::vector<VarPtr> trainable_entries() const;

  void set_trainable(const std::string& name, bool trainable);
  // Applies to every entry whose name starts with prefix. Used to freeze
  // whole encoder paths.
  void set_trainable_prefix(const std::string& prefix, bool trainable);

  void zero_grads();

  std::uint64_t checksum() const;
  std::uint64_t checksum_prefix(const std::string& prefix) const;

  // Value snapshot (by creation order) for best-checkpoint keeping.
  std::vector<Tensor> snapshot_values() const;
  void restore_values(const std::vector<Tensor>& snap);

 private:
  std::vector<VarPtr> entries_;
  std::map<std::string, std::size_t> index_;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t probes = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_tensor;
  double max_rel_err = 0.0;
  bool passed = false;
  double tol = 0.0;
};

/// Central finite differences against the reverse-mode gradient for every
/// trainable tensor in `params`. `model_fn` must rebuild the scalar loss
/// graph from current parameter values and be deterministic across calls
/// (disable dropout or fix its seed). Probes up to `probes_per_tensor`
/// seeded entries per tensor; frozen tensors are reported with error 0
/// after asserting their gradient is exactly zero.
GradCheckReport gradient_check(const std::function<VarPtr()>& model_fn,
                               ParameterSet& params, double tol,
                               std::size_t probes_per_tensor = 4,
                               std::uint64_t seed = 0);

}  // namespace spectral
