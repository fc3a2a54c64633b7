#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spectral/common.hpp"

namespace spectral {

constexpr std::size_t kFtirBands = 1765;
constexpr std::size_t kSatRawBands = 224;
constexpr std::size_t kSatFilteredBands = 218;
constexpr std::size_t kLatentDim = 64;
constexpr std::size_t kAncillaryCount = 8;
constexpr std::size_t kStudentInputWidth = kLatentDim + kAncillaryCount;
constexpr double kSalinityMin = 0.0;
constexpr double kSalinityMax = 90.0;

struct GeoLocation {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  void validate() const {
    require(lat_deg >= -90.0 && lat_deg <= 90.0, "location: latitude range");
    require(lon_deg >= -180.0 && lon_deg <= 180.0, "location: longitude range");
  }
};

struct Date {
  int year = 0, month = 0, day = 0;
  std::string to_string() const;          // YYYY-MM-DD
  static Date parse(const std::string&);  // throws ValidationError
};

/// Laboratory absorbance spectrum, 1765 mid-infrared bands.
struct FtirSpectrum {
  std::vector<double> absorbance;
  GeoLocation location;
  std::optional<double> salinity_label;  // dS/m

  void validate() const;
};

/// Satellite reflectance spectrum: 224 raw bands or 218 after the
/// band-removal step. When `normalized` is set all values lie in [0,1].
struct SatelliteSpectrum {
  std::vector<double> reflectance;
  GeoLocation location;
  Date acquisition_date;
  bool normalized = false;

  void validate() const;
};

/// Soil texture plus seasonal climate summary, fixed order:
/// sand, clay, t_min, t_max, t_mean, p_min, p_max, p_mean.
struct AncillaryFeatures {
  double sand_fraction = 0.0;
  double clay_fraction = 0.0;
  double temp_min = 0.0, temp_max = 0.0, temp_mean = 0.0;
  double precip_min = 0.0, precip_max = 0.0, precip_mean = 0.0;

  std::vector<double> to_vector() const;
  static AncillaryFeatures from_vector(const std::vector<double>& v);
  void validate() const;
};

/// Student training unit: adapted 64-d embedding + 8 ancillary features
/// + salinity label.
struct LabeledSample {
  std::vector<double> adapted_embedding;  // 64 values
  AncillaryFeatures ancillary;
  double salinity = 0.0;
  GeoLocation location;

  void validate() const;
};

/// Row-major H x W grid of pixels from one acquisition.
struct SatelliteScene {
  std::size_t height = 0, width = 0;
  std::vector<SatelliteSpectrum> pixels;

  const SatelliteSpectrum& at(std::size_t r, std::size_t c) const {
    return pixels[r * width + c];
  }
};

// ---- preprocessing -------------------------------------------------------

/// Removes the listed band indices, preserving the order of survivors.
/// Indices must be distinct and in range.
std::vector<double> filter_bands(const std::vector<double>& bands,
                                 const std::vector<std::size_t>& drop);

/// 224-band spectrum minus the configured drop list (size 0 for identity
/// or 6 for the standard removal).
SatelliteSpectrum drop_bands(const SatelliteSpectrum& s,
                             const std::vector<std::size_t>& drop);

/// Per-spectrum min-max scaling to [0,1]. Constant spectra are rejected
/// rather than silently zeroed.
std::vector<double> minmax_normalize(const std::vector<double>& v);
SatelliteSpectrum minmax_normalize(const SatelliteSpectrum& s);

/// Non-overlapping tile x tile crops in row-major order; ragged margins
/// are discarded.
std::vector<SatelliteScene> tile_crop(const SatelliteScene& scene,
                                      std::size_t tile = 64);

/// Concatenates the 64-d embedding (positions 0-63) and the ancillary
/// block (positions 64-71). This layout is what the feature-distillation
/// slice depends on.
std::vector<double> assemble_student_input(const std::vector<double>& z,
                                           const AncillaryFeatures& a);

}  // namespace spectral
