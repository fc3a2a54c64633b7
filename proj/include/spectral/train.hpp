#pragma once

#include <functional>
#include <map>

#include "spectral/autodiff.hpp"

namespace spectral {

struct TrainSchedule {
  int max_epochs = 200;
  int early_stop_patience = 10;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  double l2_weight = 1e-5;  // decoupled weight decay
  double plateau_factor = 0.5;
  int plateau_patience = 5;
  double min_lr = 1e-6;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adam with decoupled weight decay. Gradients are clipped to a global
/// norm before every update; frozen tensors are skipped entirely.
class AdamOptimizer {
 public:
  AdamOptimizer(ParameterSet& params, const TrainSchedule& sched);

  /// Clips the global gradient norm of all trainable tensors, applies one
  /// update, and returns the post-clip norm.
  double clip_and_step(double lr);

 private:
  ParameterSet& params_;
  double beta1_, beta2_, eps_, weight_decay_, clip_;
  std::map<std::string, Tensor> m_, v_;
  std::map<std::string, std::size_t> t_;
};

using MetricRow = std::vector<std::pair<std::string, double>>;

struct EpochLog {
  int epoch = 0;
  MetricRow train_terms;
  MetricRow val_terms;
  double lr = 0.0;
};

struct RunResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_grad_norms;  // post-clip, every optimizer step
  std::vector<int> lr_halvings;         // epochs at which the lr halved
  int best_epoch = 0;
  double best_metric = 0.0;
  int epochs_run = 0;
};

/// One training epoch: builds batches, steps the optimizer, returns the
/// averaged loss terms. Throws DivergenceError on a non-finite loss.
using TrainEpochFn = std::function<MetricRow(
    int epoch, AdamOptimizer& opt, double lr, std::vector<double>& step_norms)>;
using ValidateFn = std::function<MetricRow()>;

/// Epoch loop with plateau-halving, early stopping after
/// `early_stop_patience` epochs without improvement of `objective_key`
/// (lower is better), and best-checkpoint restoration: parameters are left
/// at the best validation epoch on return.
RunResult run_schedule(ParameterSet& params, const TrainSchedule& sched,
                       const TrainEpochFn& train_epoch,
                       const ValidateFn& validate,
                       const std::string& objective_key);

/// Seeded shuffled mini-batches covering every index exactly once.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::mt19937_64& rng);

double find_metric(const MetricRow& row, const std::string& key);

/// Epoch log as CSV with the given column order (missing values print
/// empty). The first column is always `epoch`, the last is `lr`.
void write_training_log(const std::string& path, const RunResult& result,
                        const std::vector<std::string>& columns);

}  // namespace spectral
