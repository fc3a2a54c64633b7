#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spectral/common.hpp"

namespace spectral {

struct StratumMetrics {
  std::size_t count = 0;
  double mae = 0.0;
  double rmse = 0.0;
};

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t count = 0;
  std::array<StratumMetrics, 4> per_stratum{};  // salinity strata
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// MAE, RMSE and R^2 (about the label mean) plus a per-stratum breakdown.
/// Constant labels make R^2 undefined and are rejected.
MetricsReport evaluate(const std::vector<double>& preds,
                       const std::vector<double>& labels);

}  // namespace spectral
