#include "spectral/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace spectral {

VarPtr make_leaf(Tensor value, bool requires_grad) {
  auto v = std::make_shared<Var>();
  v->value = std::move(value);
  v->requires_grad = requires_grad;
  return v;
}

VarPtr make_const(Tensor value) { return make_leaf(std::move(value), false); }

void backward(const VarPtr& root) {
  require(root != nullptr, "backward: null root");
  require(root->value.size() == 1, "backward: root must be scalar");
  if (!root->requires_grad) return;

  // Iterative post-order DFS; graphs can be a few thousand nodes deep
  // once sequences are unrolled.
  std::vector<Var*> order;
  std::unordered_set<Var*> seen;
  std::vector<std::pair<Var*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Var* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Var* n : order) n->ensure_grad();
  root->grad.fill(0.0);
  root->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Var* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

VarPtr ParameterSet::create(const std::string& name, Tensor init,
                            bool trainable) {
  require(!index_.count(name), "parameter already exists: " + name);
  auto v = make_leaf(std::move(init), trainable);
  v->trainable = trainable;
  v->name = name;
  v->ensure_grad();
  index_[name] = entries_.size();
  entries_.push_back(v);
  return v;
}

VarPtr ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : entries_[it->second];
}

VarPtr ParameterSet::at(const std::string& name) const {
  auto v = find(name);
  require(v != nullptr, "no such parameter: " + name);
  return v;
}

std::vector<VarPtr> ParameterSet::trainable_entries() const {
  std::vector<VarPtr> out;
  for (const auto& v : entries_)
    if (v->trainable) out.push_back(v);
  return out;
}

void ParameterSet::set_trainable(const std::string& name, bool trainable) {
  auto v = at(name);
  v->trainable = trainable;
  v->requires_grad = trainable;
}

void ParameterSet::set_trainable_prefix(const std::string& prefix,
                                        bool trainable) {
  bool any = false;
  for (const auto& v : entries_) {
    if (starts_with(v->name, prefix)) {
      v->trainable = trainable;
      v->requires_grad = trainable;
      any = true;
    }
  }
  require(any, "no parameters under prefix: " + prefix);
}

void ParameterSet::zero_grads() {
  for (const auto& v : entries_) {
    v->ensure_grad();
    v->grad.fill(0.0);
  }
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& v : entries_) {
    h = fnv1a(v->name, h);
    h = fnv1a(v->value.data(), v->value.size() * sizeof(double), h);
  }
  return h;
}

std::uint64_t ParameterSet::checksum_prefix(const std::string& prefix) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& v : entries_) {
    if (!starts_with(v->name, prefix)) continue;
    h = fnv1a(v->name, h);
    h = fnv1a(v->value.data(), v->value.size() * sizeof(double), h);
  }
  return h;
}

std::vector<Tensor> ParameterSet::snapshot_values() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& v : entries_) out.push_back(v->value);
  return out;
}

void ParameterSet::restore_values(const std::vector<Tensor>& snap) {
  require(snap.size() == entries_.size(), "snapshot size mismatch");
  for (std::size_t i = 0; i < snap.size(); ++i) {
    require(snap[i].same_shape(entries_[i]->value),
            "snapshot shape mismatch: " + entries_[i]->name);
    entries_[i]->value = snap[i];
  }
}

GradCheckReport gradient_check(const std::function<VarPtr()>& model_fn,
                               ParameterSet& params, double tol,
                               std::size_t probes_per_tensor,
                               std::uint64_t seed) {
  GradCheckReport report;
  report.tol = tol;

  params.zero_grads();
  auto loss = model_fn();
  require(std::isfinite(loss->scalar()),
          "gradient_check: non-finite loss at probe point");
  backward(loss);

  auto rng = make_rng(seed, 0x6fd1);
  for (const auto& p : params.entries()) {
    GradCheckEntry entry;
    entry.name = p->name;
    if (!p->trainable) {
      // Frozen tensors must report exactly zero gradient.
      double g = 0.0;
      for (std::size_t i = 0; i < p->grad.size(); ++i)
        g = std::max(g, std::abs(p->grad[i]));
      entry.max_rel_err = g == 0.0 ? 0.0 : g;
      report.per_tensor.push_back(entry);
      report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
      continue;
    }
    std::size_t n = p->value.size();
    std::size_t probes = std::min(probes_per_tensor, n);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t k = 0; k < probes; ++k) {
      std::size_t idx = probes == n ? k : pick(rng);
      double x0 = p->value[idx];
      double h = 1e-5 * std::max(1.0, std::abs(x0));
      p->value[idx] = x0 + h;
      double f_plus = model_fn()->scalar();
      p->value[idx] = x0 - h;
      double f_minus = model_fn()->scalar();
      p->value[idx] = x0;
      double fd = (f_plus - f_minus) / (2.0 * h);
      double an = p->grad[idx];
      double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1.0});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.probes;
    }
    report.per_tensor.push_back(entry);
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
  }
  report.passed = report.max_rel_err < tol;
  return report;
}

}  // namespace spectral
