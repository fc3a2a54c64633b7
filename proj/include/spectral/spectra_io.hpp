#pragma once

#include "spectral/spectra.hpp"

namespace spectral {

enum class FileFormat { csv, bin };

FileFormat parse_format(const std::string& s);  // "csv" | "bin"

/// On-disk spectrum row shared by both modalities:
/// lat, lon, date (empty for laboratory spectra), label (empty when
/// absent), then the band values.
struct SpectrumRecord {
  double lat = 0.0, lon = 0.0;
  std::optional<Date> date;
  std::optional<double> label;
  std::vector<double> bands;
};

struct SpectrumFile {
  std::size_t band_count = 0;
  std::vector<SpectrumRecord> records;
};

/// CSV with header `lat,lon,date,label,b0..bN`. Numeric fields use the
/// shortest representation that parses back to the same double.
void write_spectra_csv(const std::string& path, const SpectrumFile& file);
SpectrumFile read_spectra_csv(const std::string& path);

/// Compact binary form: magic "SPC1", little-endian record and band
/// counts, then per record lat/lon, optional date, optional label and the
/// band values. Bit-exact round trip.
void write_spectra_bin(const std::string& path, const SpectrumFile& file);
SpectrumFile read_spectra_bin(const std::string& path);

void write_spectra(const std::string& path, const SpectrumFile& file,
                   FileFormat format);
SpectrumFile read_spectra(const std::string& path, FileFormat format);

// Converters. Loading validates every spectrum (the pairing stage relies
// on loader-checked completeness and geolocation validity).
SpectrumFile to_file(const std::vector<FtirSpectrum>& specs);
SpectrumFile to_file(const std::vector<SatelliteSpectrum>& specs,
                     const std::vector<double>* labels = nullptr);
std::vector<FtirSpectrum> ftir_from_file(const SpectrumFile& file);
std::vector<SatelliteSpectrum> satellite_from_file(const SpectrumFile& file);

}  // namespace spectral
