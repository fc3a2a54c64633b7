#include "spectral/spectra_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace spectral {

FileFormat parse_format(const std::string& s) {
  if (s == "csv") return FileFormat::csv;
  if (s == "bin") return FileFormat::bin;
  throw ValidationError("format: expected 'csv' or 'bin', got '" + s + "'");
}

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', '1'};

void validate_record(const SpectrumRecord& r, std::size_t band_count) {
  require(r.bands.size() == band_count, "spectra file: ragged band count");
  require(std::isfinite(r.lat) && std::isfinite(r.lon),
          "spectra file: non-finite location");
  GeoLocation{r.lat, r.lon}.validate();
  for (double v : r.bands)
    require(std::isfinite(v), "spectra file: non-finite band value");
  if (r.label)
    require(std::isfinite(*r.label), "spectra file: non-finite label");
}

template <typename T>
void write_raw(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void write_spectra_csv(const std::string& path, const SpectrumFile& file) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out << "lat,lon,date,label";
  for (std::size_t b = 0; b < file.band_count; ++b) out << ",b" << b;
  out << '\n';
  for (const auto& r : file.records) {
    require(r.bands.size() == file.band_count,
            "spectra csv: ragged band count");
    out << format_double(r.lat) << ',' << format_double(r.lon) << ','
        << (r.date ? r.date->to_string() : "") << ','
        << (r.label ? format_double(*r.label) : "");
    for (double v : r.bands) out << ',' << format_double(v);
    out << '\n';
  }
  require(out.good(), "write failed: " + path);
}

SpectrumFile read_spectra_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          "spectra csv: missing header in " + path);
  auto header = split_csv_line(line);
  require(header.size() >= 5 && header[0] == "lat" && header[1] == "lon" &&
              header[2] == "date" && header[3] == "label",
          "spectra csv: unexpected header in " + path);
  SpectrumFile file;
  file.band_count = header.size() - 4;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    require(f.size() == header.size(), "spectra csv: ragged row in " + path);
    SpectrumRecord r;
    r.lat = std::stod(f[0]);
    r.lon = std::stod(f[1]);
    if (!f[2].empty()) r.date = Date::parse(f[2]);
    if (!f[3].empty()) r.label = std::stod(f[3]);
    r.bands.reserve(file.band_count);
    for (std::size_t b = 0; b < file.band_count; ++b)
      r.bands.push_back(std::stod(f[4 + b]));
    validate_record(r, file.band_count);
    file.records.push_back(std::move(r));
  }
  return file;
}

void write_spectra_bin(const std::string& path, const SpectrumFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(file.records.size()));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(file.band_count));
  for (const auto& r : file.records) {
    require(r.bands.size() == file.band_count,
            "spectra bin: ragged band count");
    write_raw<double>(out, r.lat);
    write_raw<double>(out, r.lon);
    write_raw<std::uint8_t>(out, r.date ? 1 : 0);
    write_raw<std::uint16_t>(out, r.date ? static_cast<std::uint16_t>(r.date->year) : 0);
    write_raw<std::uint8_t>(out, r.date ? static_cast<std::uint8_t>(r.date->month) : 0);
    write_raw<std::uint8_t>(out, r.date ? static_cast<std::uint8_t>(r.date->day) : 0);
    write_raw<std::uint8_t>(out, r.label ? 1 : 0);
    write_raw<double>(out, r.label ? *r.label : 0.0);
    out.write(reinterpret_cast<const char*>(r.bands.data()),
              static_cast<std::streamsize>(r.bands.size() * sizeof(double)));
  }
  require(out.good(), "write failed: " + path);
}

SpectrumFile read_spectra_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          "spectra bin: bad magic in " + path);
  auto count = read_raw<std::uint32_t>(in);
  SpectrumFile file;
  file.band_count = read_raw<std::uint32_t>(in);
  file.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SpectrumRecord r;
    r.lat = read_raw<double>(in);
    r.lon = read_raw<double>(in);
    auto has_date = read_raw<std::uint8_t>(in);
    Date d;
    d.year = read_raw<std::uint16_t>(in);
    d.month = read_raw<std::uint8_t>(in);
    d.day = read_raw<std::uint8_t>(in);
    if (has_date) r.date = d;
    auto has_label = read_raw<std::uint8_t>(in);
    double label = read_raw<double>(in);
    if (has_label) r.label = label;
    r.bands.resize(file.band_count);
    in.read(reinterpret_cast<char*>(r.bands.data()),
            static_cast<std::streamsize>(file.band_count * sizeof(double)));
    require(in.good(), "spectra bin: truncated file " + path);
    validate_record(r, file.band_count);
    file.records.push_back(std::move(r));
  }
  return file;
}

void write_spectra(const std::string& path, const SpectrumFile& file,
                   FileFormat format) {
  if (format == FileFormat::csv)
    write_spectra_csv(path, file);
  else
    write_spectra_bin(path, file);
}

SpectrumFile read_spectra(const std::string& path, FileFormat format) {
  return format == FileFormat::csv ? read_spectra_csv(path)
                                   : read_spectra_bin(path);
}

SpectrumFile to_file(const std::vector<FtirSpectrum>& specs) {
  SpectrumFile file;
  file.band_count = kFtirBands;
  for (const auto& s : specs) {
    s.validate();
    SpectrumRecord r;
    r.lat = s.location.lat_deg;
    r.lon = s.location.lon_deg;
    r.label = s.salinity_label;
    r.bands = s.absorbance;
    file.records.push_back(std::move(r));
  }
  return file;
}

SpectrumFile to_file(const std::vector<SatelliteSpectrum>& specs,
                     const std::vector<double>* labels) {
  SpectrumFile file;
  require(!specs.empty(), "spectra file: empty satellite list");
  require(!labels || labels->size() == specs.size(),
          "spectra file: label count mismatch");
  file.band_count = specs.front().reflectance.size();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    s.validate();
    SpectrumRecord r;
    r.lat = s.location.lat_deg;
    r.lon = s.location.lon_deg;
    r.date = s.acquisition_date;
    if (labels) r.label = (*labels)[i];
    r.bands = s.reflectance;
    file.records.push_back(std::move(r));
  }
  return file;
}

std::vector<FtirSpectrum> ftir_from_file(const SpectrumFile& file) {
  require(file.band_count == kFtirBands,
          "spectra file: expected 1765 bands for FTIR");
  std::vector<FtirSpectrum> out;
  out.reserve(file.records.size());
  for (const auto& r : file.records) {
    FtirSpectrum s;
    s.absorbance = r.bands;
    s.location = {r.lat, r.lon};
    s.salinity_label = r.label;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SatelliteSpectrum> satellite_from_file(const SpectrumFile& file) {
  require(file.band_count == kSatRawBands ||
              file.band_count == kSatFilteredBands,
          "spectra file: expected 224 or 218 bands for satellite");
  std::vector<SatelliteSpectrum> out;
  out.reserve(file.records.size());
  for (const auto& r : file.records) {
    SatelliteSpectrum s;
    s.reflectance = r.bands;
    s.location = {r.lat, r.lon};
    if (r.date) s.acquisition_date = *r.date;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace spectral
