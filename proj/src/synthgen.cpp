#include "spectral/synthgen.hpp"

#include <algorithm>
#include <cmath>

namespace spectral {
namespace synthgen {

namespace {

constexpr double kResponseScale = 25.0;  // g(s) = s / (s + 25)
constexpr double kPeakWidth = 8.0;       // bands
constexpr std::size_t kShoulder = 64;    // bands; 8 widths from the center

const std::vector<std::size_t>& peak_centers() {
  static const std::vector<std::size_t> c = {250, 650, 1050, 1450};
  return c;
}

const std::vector<double>& peak_depths() {
  static const std::vector<double> d = {0.9, 0.7, 0.5, 0.6};
  return d;
}

double gauss(double x, double mu, double sigma) {
  double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z);
}

// Latent fine-grid reflectance shared by the satellite bands.
constexpr std::size_t kFineGrid = 10;  // samples per satellite band

double latent_reflectance(const SiteState& site, double u) {
  double g = peak_response(site.salinity);
  double r = site.soil_albedo * (0.9 + 0.35 * u);
  // moisture darkens two water-absorption regions
  r -= site.moisture * (0.25 * gauss(u, 0.62, 0.05) + 0.20 * gauss(u, 0.85, 0.04));
  // clay feature
  r += site.ancillary.clay_fraction * 0.10 * gauss(u, 0.45, 0.06);
  // bright salt-crust features, monotone in salinity
  r += g * (0.12 * gauss(u, 0.30, 0.035) + 0.10 * gauss(u, 0.55, 0.03) +
            0.08 * gauss(u, 0.75, 0.04));
  return r;
}

}  // namespace

void WorldConfig::validate() const {
  require(sample_count >= 1, "world: sample_count must be positive");
  require(pair_fraction >= 0.0 && pair_fraction <= 1.0,
          "world: pair_fraction outside [0,1]");
  require(zero_fraction >= 0.0 && zero_fraction <= 1.0,
          "world: zero_fraction outside [0,1]");
  require(sigma_lab >= 0.0 && sigma_sat >= sigma_lab,
          "world: require sigma_sat >= sigma_lab >= 0");
  require(distortion >= 0.0 && distortion < 1.0,
          "world: distortion outside [0,1)");
  require(lat_min < lat_max && lon_min < lon_max, "world: empty region box");
  GeoLocation{lat_min, lon_min}.validate();
  GeoLocation{lat_max, lon_max}.validate();
  require(lognormal_sigma > 0.0, "world: lognormal_sigma must be positive");
}

double peak_response(double salinity) {
  return salinity / (salinity + kResponseScale);
}

double invert_peak_response(double g) {
  if (g <= 0.0) return 0.0;
  double capped = std::min(g, kSalinityMax / (kSalinityMax + kResponseScale));
  return std::clamp(kResponseScale * capped / (1.0 - capped), 0.0,
                    kSalinityMax);
}

const std::vector<std::size_t>& ftir_peak_centers() { return peak_centers(); }
const std::vector<double>& ftir_peak_depths() { return peak_depths(); }
double ftir_peak_width() { return kPeakWidth; }
std::size_t oracle_shoulder_offset() { return kShoulder; }

double sample_salinity(const WorldConfig& cfg, std::mt19937_64& rng,
                       double clay_fraction, double precip_mean) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < cfg.zero_fraction) return 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  double mu = cfg.lognormal_mu + cfg.clay_effect * (clay_fraction - 0.3) +
              cfg.precip_effect * (45.0 - precip_mean) / 40.0;
  double s = std::exp(mu + cfg.lognormal_sigma * n(rng));
  return std::clamp(s, 0.0, kSalinityMax);
}

SiteState sample_site(const WorldConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SiteState site;
  site.location.lat_deg = cfg.lat_min + (cfg.lat_max - cfg.lat_min) * u01(rng);
  site.location.lon_deg = cfg.lon_min + (cfg.lon_max - cfg.lon_min) * u01(rng);

  auto& a = site.ancillary;
  a.clay_fraction = 0.05 + 0.50 * u01(rng);
  a.sand_fraction = 0.05 + (0.90 - a.clay_fraction) * u01(rng);
  a.temp_mean = 8.0 + 20.0 * u01(rng);
  a.temp_min = a.temp_mean - (4.0 + 8.0 * u01(rng));
  a.temp_max = a.temp_mean + (4.0 + 8.0 * u01(rng));
  a.precip_mean = 15.0 + 80.0 * u01(rng);
  a.precip_min = a.precip_mean * (0.2 + 0.4 * u01(rng));
  a.precip_max = a.precip_mean * (1.4 + 0.8 * u01(rng));

  site.soil_albedo = 0.15 + 0.30 * u01(rng);
  site.moisture = std::clamp(0.1 + 0.006 * a.precip_mean +
                                 0.2 * (u01(rng) - 0.5),
                             0.05, 0.9);
  site.salinity =
      sample_salinity(cfg, rng, a.clay_fraction, a.precip_mean);
  return site;
}

double ftir_baseline(const SiteState& site, std::size_t band) {
  double t = static_cast<double>(band) / static_cast<double>(kFtirBands - 1);
  double b0 = 0.35 + 0.50 * site.soil_albedo + 0.15 * site.moisture;
  double b1 = 0.25 - 0.30 * site.moisture +
              0.20 * site.ancillary.clay_fraction;
  return b0 + b1 * t;
}

FtirSpectrum gen_ftir(const SiteState& site, const WorldConfig& cfg,
                      std::mt19937_64& rng) {
  FtirSpectrum s;
  s.absorbance.resize(kFtirBands);
  double g = peak_response(site.salinity);
  const auto& centers = peak_centers();
  const auto& depths = peak_depths();
  for (std::size_t b = 0; b < kFtirBands; ++b) {
    double v = ftir_baseline(site, b);
    for (std::size_t k = 0; k < centers.size(); ++k)
      v += depths[k] * g *
           gauss(static_cast<double>(b), static_cast<double>(centers[k]),
                 kPeakWidth);
    s.absorbance[b] = v;
  }
  if (cfg.sigma_lab > 0.0) {
    std::normal_distribution<double> n(0.0, cfg.sigma_lab);
    for (auto& v : s.absorbance) v += n(rng);
  }
  s.location = site.location;
  s.salinity_label = site.salinity;
  return s;
}

SatelliteSpectrum gen_satellite(const SiteState& site, const WorldConfig& cfg,
                                std::mt19937_64& rng) {
  SatelliteSpectrum s;
  s.reflectance.resize(kSatRawBands);
  for (std::size_t b = 0; b < kSatRawBands; ++b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < kFineGrid; ++j) {
      double u = (static_cast<double>(b) * kFineGrid + j + 0.5) /
                 static_cast<double>(kSatRawBands * kFineGrid);
      acc += latent_reflectance(site, u);
    }
    s.reflectance[b] = acc / static_cast<double>(kFineGrid);
  }
  if (cfg.distortion > 0.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double phase = u01(rng);
    double cycles = 1.0 + std::floor(3.0 * u01(rng));  // 1..3 slow waves
    double amp = cfg.distortion * (0.5 + 0.5 * u01(rng));
    for (std::size_t b = 0; b < kSatRawBands; ++b) {
      double u = static_cast<double>(b) / static_cast<double>(kSatRawBands);
      s.reflectance[b] *= 1.0 + amp * std::sin(2.0 * M_PI * (cycles * u + phase));
    }
  }
  if (cfg.sigma_sat > 0.0) {
    std::normal_distribution<double> n(0.0, cfg.sigma_sat);
    for (auto& v : s.reflectance) v += n(rng);
  }
  for (auto& v : s.reflectance) v = std::max(v, 1e-4);
  s.location = site.location;
  s.acquisition_date = {2023, 7, 1};
  return s;
}

double oracle_salinity(const std::vector<double>& absorbance) {
  require(absorbance.size() == kFtirBands,
          "oracle: expected a 1765-band spectrum");
  const auto& centers = peak_centers();
  const auto& depths = peak_depths();
  // Own-peak tail at the shoulders; the baseline is linear so the
  // shoulder midpoint cancels it exactly.
  double kappa = 1.0 - gauss(static_cast<double>(kShoulder), 0.0, kPeakWidth);
  double g_sum = 0.0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    std::size_t c = centers[k];
    double shoulder =
        0.5 * (absorbance[c - kShoulder] + absorbance[c + kShoulder]);
    double est = absorbance[c] - shoulder;
    g_sum += est / (depths[k] * kappa);
  }
  return invert_peak_response(g_sum / static_cast<double>(centers.size()));
}

std::size_t diagnostic_sat_band() {
  // center of the strongest salt feature on the fine grid
  return static_cast<std::size_t>(0.30 * kSatRawBands);
}

SyntheticDataset gen_dataset(const WorldConfig& cfg) {
  cfg.validate();
  SyntheticDataset ds;
  std::size_t n = cfg.sample_count;
  std::size_t n_paired =
      static_cast<std::size_t>(std::floor(cfg.pair_fraction * n));
  ds.ftir.reserve(n);
  ds.satellite.reserve(n);
  ds.ancillary.reserve(n);
  ds.sat_labels.reserve(n);
  ds.ftir_twin.assign(n, -1);

  // RNG stream layout per sample: site state, lab noise, satellite noise,
  // location jitter. Unpaired laboratory sites use a disjoint block.
  auto stream = [&](std::size_t sample, std::size_t purpose) {
    return make_rng(cfg.seed, sample * 8 + purpose);
  };

  for (std::size_t i = 0; i < n; ++i) {
    auto site_rng = stream(i, 0);
    SiteState site = sample_site(cfg, site_rng);

    auto sat_rng = stream(i, 2);
    ds.satellite.push_back(gen_satellite(site, cfg, sat_rng));
    ds.ancillary.push_back(site.ancillary);
    ds.sat_labels.push_back(site.salinity);

    if (i < n_paired) {
      // collocated laboratory twin, displaced well under tau (~1 km)
      auto jit_rng = stream(i, 3);
      std::uniform_real_distribution<double> jit(-0.0015, 0.0015);  // ~±170 m
      SiteState lab_site = site;
      lab_site.location.lat_deg += jit(jit_rng);
      lab_site.location.lon_deg += jit(jit_rng);
      auto lab_rng = stream(i, 1);
      ds.ftir.push_back(gen_ftir(lab_site, cfg, lab_rng));
      ds.ftir_twin[i] = static_cast<std::int64_t>(ds.ftir.size() - 1);
    } else {
      // independent laboratory site
      auto extra_rng = stream(n + i, 0);
      SiteState lab_site = sample_site(cfg, extra_rng);
      auto lab_rng = stream(n + i, 1);
      ds.ftir.push_back(gen_ftir(lab_site, cfg, lab_rng));
    }
  }
  return ds;
}

}  // namespace synthgen
}  // namespace spectral
