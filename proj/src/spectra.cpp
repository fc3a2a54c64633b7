#include "spectral/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace spectral {

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(const std::string& s) {
  Date d;
  if (std::sscanf(s.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3)
    throw ValidationError("date: expected YYYY-MM-DD, got '" + s + "'");
  require(d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= 31,
          "date: out of range '" + s + "'");
  return d;
}

void FtirSpectrum::validate() const {
  require(absorbance.size() == kFtirBands,
          "FTIR spectrum: expected 1765 bands, got " +
              std::to_string(absorbance.size()));
  for (double v : absorbance)
    require(std::isfinite(v), "FTIR spectrum: non-finite band value");
  location.validate();
  if (salinity_label) {
    require(*salinity_label >= kSalinityMin && *salinity_label <= kSalinityMax,
            "FTIR spectrum: salinity label outside [0, 90]");
  }
}

void SatelliteSpectrum::validate() const {
  require(reflectance.size() == kSatRawBands ||
              reflectance.size() == kSatFilteredBands,
          "satellite spectrum: expected 224 or 218 bands, got " +
              std::to_string(reflectance.size()));
  for (double v : reflectance) {
    require(std::isfinite(v), "satellite spectrum: non-finite band value");
    if (normalized)
      require(v >= 0.0 && v <= 1.0,
              "satellite spectrum: normalized flag set but value outside [0,1]");
  }
  location.validate();
}

std::vector<double> AncillaryFeatures::to_vector() const {
  return {sand_fraction, clay_fraction, temp_min,   temp_max,
          temp_mean,     precip_min,    precip_max, precip_mean};
}

AncillaryFeatures AncillaryFeatures::from_vector(
    const std::vector<double>& v) {
  require(v.size() == kAncillaryCount, "ancillary: expected 8 values");
  AncillaryFeatures a;
  a.sand_fraction = v[0];
  a.clay_fraction = v[1];
  a.temp_min = v[2];
  a.temp_max = v[3];
  a.temp_mean = v[4];
  a.precip_min = v[5];
  a.precip_max = v[6];
  a.precip_mean = v[7];
  return a;
}

void AncillaryFeatures::validate() const {
  require(sand_fraction >= 0.0 && sand_fraction <= 1.0,
          "ancillary: sand fraction outside [0,1]");
  require(clay_fraction >= 0.0 && clay_fraction <= 1.0,
          "ancillary: clay fraction outside [0,1]");
  require(sand_fraction + clay_fraction <= 1.0 + 1e-12,
          "ancillary: sand + clay exceeds 1");
  for (double v : to_vector())
    require(std::isfinite(v), "ancillary: non-finite value");
  require(temp_min <= temp_mean && temp_mean <= temp_max,
          "ancillary: temperature ordering");
  require(precip_min <= precip_mean && precip_mean <= precip_max,
          "ancillary: precipitation ordering");
}

void LabeledSample::validate() const {
  require(adapted_embedding.size() == kLatentDim,
          "labeled sample: embedding must have 64 values");
  for (double v : adapted_embedding)
    require(std::isfinite(v), "labeled sample: non-finite embedding");
  ancillary.validate();
  require(salinity >= kSalinityMin && salinity <= kSalinityMax,
          "labeled sample: salinity outside [0, 90]");
  location.validate();
}

std::vector<double> filter_bands(const std::vector<double>& bands,
                                 const std::vector<std::size_t>& drop) {
  std::set<std::size_t> dropped;
  for (auto i : drop) {
    require(i < bands.size(), "drop_bands: index out of range");
    require(dropped.insert(i).second, "drop_bands: duplicate index");
  }
  std::vector<double> out;
  out.reserve(bands.size() - dropped.size());
  for (std::size_t i = 0; i < bands.size(); ++i)
    if (!dropped.count(i)) out.push_back(bands[i]);
  return out;
}

SatelliteSpectrum drop_bands(const SatelliteSpectrum& s,
                             const std::vector<std::size_t>& drop) {
  require(s.reflectance.size() == kSatRawBands,
          "drop_bands: input must have 224 bands");
  require(drop.empty() || drop.size() == kSatRawBands - kSatFilteredBands,
          "drop_bands: drop list must have 0 or 6 indices");
  SatelliteSpectrum out = s;
  out.reflectance = filter_bands(s.reflectance, drop);
  return out;
}

std::vector<double> minmax_normalize(const std::vector<double>& v) {
  require(v.size() >= 2, "minmax: need at least two values");
  auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
  double mn = *mn_it, mx = *mx_it;
  require(mx > mn, "minmax: degenerate range (constant spectrum)");
  std::vector<double> out(v.size());
  double inv = 1.0 / (mx - mn);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mn) * inv;
  return out;
}

SatelliteSpectrum minmax_normalize(const SatelliteSpectrum& s) {
  SatelliteSpectrum out = s;
  out.reflectance = minmax_normalize(s.reflectance);
  out.normalized = true;
  return out;
}

std::vector<SatelliteScene> tile_crop(const SatelliteScene& scene,
                                      std::size_t tile) {
  require(tile >= 1, "tile_crop: tile must be positive");
  require(scene.pixels.size() == scene.height * scene.width,
          "tile_crop: pixel count != height * width");
  require(scene.height >= tile && scene.width >= tile,
          "tile_crop: scene smaller than one tile");
  std::size_t th = scene.height / tile, tw = scene.width / tile;
  std::vector<SatelliteScene> tiles;
  tiles.reserve(th * tw);
  for (std::size_t tr = 0; tr < th; ++tr) {
    for (std::size_t tc = 0; tc < tw; ++tc) {
      SatelliteScene t;
      t.height = tile;
      t.width = tile;
      t.pixels.reserve(tile * tile);
      for (std::size_t r = 0; r < tile; ++r)
        for (std::size_t c = 0; c < tile; ++c)
          t.pixels.push_back(scene.at(tr * tile + r, tc * tile + c));
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<double> assemble_student_input(const std::vector<double>& z,
                                           const AncillaryFeatures& a) {
  require(z.size() == kLatentDim, "assemble: embedding must have 64 values");
  for (double v : z)
    require(std::isfinite(v), "assemble: non-finite embedding value");
  a.validate();
  std::vector<double> out;
  out.reserve(kStudentInputWidth);
  out.insert(out.end(), z.begin(), z.end());
  auto av = a.to_vector();
  out.insert(out.end(), av.begin(), av.end());
  return out;
}

}  // namespace spectral
