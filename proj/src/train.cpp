#include "spectral/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace spectral {

void TrainSchedule::validate() const {
  require(max_epochs >= 1, "schedule: max_epochs must be positive");
  require(early_stop_patience >= 1 && early_stop_patience < max_epochs,
          "schedule: patience must be positive and below max_epochs");
  require(lr > 0.0 && min_lr > 0.0 && min_lr <= lr, "schedule: bad lr range");
  require(batch_size >= 1, "schedule: batch_size must be positive");
  require(l2_weight >= 0.0, "schedule: l2_weight must be nonnegative");
  require(plateau_factor > 0.0 && plateau_factor < 1.0,
          "schedule: plateau factor outside (0,1)");
  require(plateau_patience >= 1, "schedule: plateau patience must be positive");
  require(grad_clip_norm > 0.0, "schedule: grad clip must be positive");
}

AdamOptimizer::AdamOptimizer(ParameterSet& params, const TrainSchedule& sched)
    : params_(params),
      beta1_(sched.adam_beta1),
      beta2_(sched.adam_beta2),
      eps_(sched.adam_eps),
      weight_decay_(sched.l2_weight),
      clip_(sched.grad_clip_norm) {}

double AdamOptimizer::clip_and_step(double lr) {
  double sq = 0.0;
  for (const auto& p : params_.entries()) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i)
      sq += p->grad[i] * p->grad[i];
  }
  double norm = std::sqrt(sq);
  double scale = norm > clip_ ? clip_ / norm : 1.0;
  double post_norm = std::min(norm, clip_);

  for (const auto& p : params_.entries()) {
    if (!p->trainable) continue;
    auto mit = m_.find(p->name);
    if (mit == m_.end()) {
      mit = m_.emplace(p->name, Tensor::zeros(p->value.shape())).first;
      v_.emplace(p->name, Tensor::zeros(p->value.shape()));
      t_.emplace(p->name, 0);
    }
    Tensor& m = mit->second;
    Tensor& v = v_[p->name];
    std::size_t t = ++t_[p->name];
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i] * scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p->value[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) +
                           weight_decay_ * p->value[i]);
    }
  }
  return post_norm;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += batch_size) {
    std::size_t e = std::min(n, b + batch_size);
    batches.emplace_back(order.begin() + b, order.begin() + e);
  }
  return batches;
}

double find_metric(const MetricRow& row, const std::string& key) {
  for (const auto& [k, v] : row)
    if (k == key) return v;
  throw ValidationError("metric not found: " + key);
}

RunResult run_schedule(ParameterSet& params, const TrainSchedule& sched,
                       const TrainEpochFn& train_epoch,
                       const ValidateFn& validate,
                       const std::string& objective_key) {
  sched.validate();
  RunResult res;
  double lr = sched.lr;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_snapshot = params.snapshot_values();
  int since_best = 0, plateau_since = 0;
  AdamOptimizer opt(params, sched);

  for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
    auto train_terms = train_epoch(epoch, opt, lr, res.step_grad_norms);
    auto val_terms = validate();
    double metric = find_metric(val_terms, objective_key);
    if (!std::isfinite(metric))
      throw DivergenceError("validation metric went non-finite at epoch " +
                            std::to_string(epoch));
    res.epochs.push_back({epoch, train_terms, val_terms, lr});
    res.epochs_run = epoch;

    if (metric < best) {
      best = metric;
      res.best_epoch = epoch;
      best_snapshot = params.snapshot_values();
      since_best = 0;
      plateau_since = 0;
    } else {
      ++since_best;
      ++plateau_since;
    }
    if (plateau_since >= sched.plateau_patience && lr > sched.min_lr) {
      lr = std::max(lr * sched.plateau_factor, sched.min_lr);
      res.lr_halvings.push_back(epoch);
      plateau_since = 0;
    }
    if (since_best >= sched.early_stop_patience) break;
  }
  res.best_metric = best;
  params.restore_values(best_snapshot);
  return res;
}

void write_training_log(const std::string& path, const RunResult& result,
                        const std::vector<std::string>& columns) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out << "epoch";
  for (const auto& c : columns) out << ',' << c;
  out << ",lr\n";
  for (const auto& e : result.epochs) {
    out << e.epoch;
    for (const auto& c : columns) {
      out << ',';
      bool found = false;
      for (const auto& [k, v] : e.train_terms)
        if (k == c) {
          out << format_double(v);
          found = true;
          break;
        }
      if (!found)
        for (const auto& [k, v] : e.val_terms)
          if (k == c) {
            out << format_double(v);
            found = true;
            break;
          }
    }
    out << ',' << format_double(e.lr) << '\n';
  }
  require(out.good(), "write failed: " + path);
}

}  // namespace spectral
