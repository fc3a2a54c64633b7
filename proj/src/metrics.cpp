#include "spectral/metrics.hpp"

#include <cmath>

#include "spectral/geopair.hpp"

namespace spectral {

MetricsReport evaluate(const std::vector<double>& preds,
                       const std::vector<double>& labels) {
  require(preds.size() == labels.size(), "evaluate: length mismatch");
  require(!preds.empty(), "evaluate: empty inputs");
  MetricsReport r;
  r.count = preds.size();

  double label_mean = 0.0;
  for (double y : labels) {
    require(std::isfinite(y), "evaluate: non-finite label");
    label_mean += y;
  }
  label_mean /= static_cast<double>(labels.size());

  double abs_sum = 0.0, sq_sum = 0.0, sst = 0.0;
  std::array<double, 4> st_abs{}, st_sq{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(std::isfinite(preds[i]), "evaluate: non-finite prediction");
    double e = preds[i] - labels[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    double d = labels[i] - label_mean;
    sst += d * d;
    std::size_t s = salinity_stratum(labels[i]);
    r.per_stratum[s].count += 1;
    st_abs[s] += std::abs(e);
    st_sq[s] += e * e;
  }
  require(sst > 0.0, "evaluate: R^2 undefined for constant labels");

  double n = static_cast<double>(preds.size());
  r.mae = abs_sum / n;
  r.rmse = std::sqrt(sq_sum / n);
  r.r2 = 1.0 - sq_sum / sst;
  for (std::size_t s = 0; s < 4; ++s) {
    if (r.per_stratum[s].count == 0) continue;
    double c = static_cast<double>(r.per_stratum[s].count);
    r.per_stratum[s].mae = st_abs[s] / c;
    r.per_stratum[s].rmse = std::sqrt(st_sq[s] / c);
  }
  return r;
}

}  // namespace spectral
