#pragma once

#include <cstdint>

#include "spectral/spectra.hpp"

namespace spectral {
namespace synthgen {

/// Configuration of the synthetic paired-spectra world. The generator is
/// fully reproducible from `seed`; every site draws from its own RNG
/// stream so per-sample generation is order-independent.
struct WorldConfig {
  std::size_t sample_count = 3000;
  double pair_fraction = 2.0 / 3.0;  // satellite samples with a collocated
                                     // laboratory twin
  double zero_fraction = 0.48;
  // log-normal tail of nonzero salinity, clipped to [0, 90]
  double lognormal_mu = 0.3;
  double lognormal_sigma = 1.1;
  double clay_effect = 1.2;    // clay shifts the log-mean upward
  double precip_effect = 0.8;  // dry sites shift upward
  // noise model; satellite must be at least as noisy as the laboratory
  double sigma_lab = 0.01;
  double sigma_sat = 0.05;
  double distortion = 0.15;  // satellite multiplicative gain amplitude
  // region bounding box (degrees)
  double lat_min = 33.0, lat_max = 39.0;
  double lon_min = -112.0, lon_max = -106.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Latent per-site state shared by the laboratory and satellite
/// measurement models.
struct SiteState {
  GeoLocation location;
  AncillaryFeatures ancillary;
  double soil_albedo = 0.3;
  double moisture = 0.4;
  double salinity = 0.0;
};

/// Zero with probability zero_fraction, otherwise a clipped log-normal
/// whose log-mean shifts with clay fraction and mean precipitation.
double sample_salinity(const WorldConfig& cfg, std::mt19937_64& rng,
                       double clay_fraction = 0.3, double precip_mean = 45.0);

SiteState sample_site(const WorldConfig& cfg, std::mt19937_64& rng);

/// Laboratory measurement model: linear soil-dependent baseline plus
/// fixed Gaussian absorption peaks whose depth follows peak_response(s),
/// plus additive noise sigma_lab.
FtirSpectrum gen_ftir(const SiteState& site, const WorldConfig& cfg,
                      std::mt19937_64& rng);

/// Satellite measurement model: band-averaged latent reflectance driven
/// by the same site state, then multiplicative distortion and additive
/// noise sigma_sat. 224 raw bands.
SatelliteSpectrum gen_satellite(const SiteState& site, const WorldConfig& cfg,
                                std::mt19937_64& rng);

// ---- generator introspection (the oracle surface) ------------------------

/// Monotone saturating salinity response g(s) = s / (s + 25).
double peak_response(double salinity);
double invert_peak_response(double g);  // g^{-1}, clipped to [0, 90]

const std::vector<std::size_t>& ftir_peak_centers();
const std::vector<double>& ftir_peak_depths();
double ftir_peak_width();
double ftir_baseline(const SiteState& site, std::size_t band);

/// Shoulder offset used by the closed-form inversion.
std::size_t oracle_shoulder_offset();

/// Closed-form salinity inversion from a (noiseless) laboratory spectrum:
/// measures each diagnostic peak against the midpoint of its shoulders,
/// averages the implied responses and inverts g. Exact on noiseless
/// spectra up to floating-point error.
double oracle_salinity(const std::vector<double>& absorbance);

/// Satellite band most correlated with salinity by construction.
std::size_t diagnostic_sat_band();

// ---- whole-corpus generation ----------------------------------------------

struct SyntheticDataset {
  std::vector<FtirSpectrum> ftir;            // one per sample
  std::vector<SatelliteSpectrum> satellite;  // raw 224-band spectra
  std::vector<AncillaryFeatures> ancillary;  // per satellite sample
  std::vector<double> sat_labels;            // per satellite sample
  // collocated laboratory twin of satellite sample i, or -1
  std::vector<std::int64_t> ftir_twin;
};

/// The first floor(pair_fraction * n) satellite samples share a site
/// (and state) with their laboratory twin, displaced by well under tau;
/// all other samples sit on independent sites.
SyntheticDataset gen_dataset(const WorldConfig& cfg);

}  // namespace synthgen
}  // namespace spectral
