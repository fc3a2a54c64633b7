#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "spectral/spectra.hpp"
#include "spectral/spectra_io.hpp"

using namespace spectral;

namespace {

SatelliteSpectrum raw_spectrum(double base = 0.1) {
  SatelliteSpectrum s;
  s.reflectance.resize(kSatRawBands);
  for (std::size_t i = 0; i < kSatRawBands; ++i)
    s.reflectance[i] = base + 0.001 * static_cast<double>(i);
  s.location = {36.5, -119.5};
  s.acquisition_date = {2023, 6, 15};
  return s;
}

}  // namespace

TEST_CASE("drop_bands") {
  SUBCASE("224 minus 6 gives 218, order preserved") {
    SatelliteSpectrum s = raw_spectrum();
    auto out = drop_bands(s, {218, 219, 220, 221, 222, 223});
    CHECK(out.reflectance.size() == kSatFilteredBands);
    CHECK(out.reflectance.front() == s.reflectance.front());
    CHECK(out.reflectance.back() == s.reflectance[217]);
  }
  SUBCASE("empty drop list is the identity") {
    SatelliteSpectrum s = raw_spectrum();
    auto out = drop_bands(s, {});
    CHECK(out.reflectance == s.reflectance);
  }
  SUBCASE("ramp oracle against direct list filtering") {
    std::vector<double> ramp(224);
    std::iota(ramp.begin(), ramp.end(), 0.0);
    auto out = filter_bands(ramp, {0, 1, 2, 3, 4, 5});
    CHECK(out.size() == 218);
    CHECK(out.front() == 6.0);
    // independent filter oracle
    std::vector<double> expect;
    for (std::size_t i = 0; i < ramp.size(); ++i)
      if (i > 5) expect.push_back(ramp[i]);
    CHECK(out == expect);
  }
  SUBCASE("duplicate or out-of-range index rejected") {
    SatelliteSpectrum s = raw_spectrum();
    CHECK_THROWS_AS(drop_bands(s, {1, 1, 2, 3, 4, 5}), ValidationError);
    CHECK_THROWS_AS(drop_bands(s, {1, 2, 3, 4, 5, 224}), ValidationError);
    CHECK_THROWS_AS(drop_bands(s, {1, 2, 3}), ValidationError);
  }
}

TEST_CASE("minmax normalization") {
  SUBCASE("affine map oracle") {
    auto out = minmax_normalize(std::vector<double>{2.0, 4.0, 6.0});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out[2] == 1.0);
  }
  SUBCASE("already-normalized ramp is a fixed point") {
    std::vector<double> ramp(11);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.1 * (double)i;
    auto out = minmax_normalize(ramp);
    for (std::size_t i = 0; i < ramp.size(); ++i)
      CHECK(out[i] == doctest::Approx(ramp[i]).epsilon(1e-12));
  }
  SUBCASE("random vector matches direct recomputation") {
    auto rng = make_rng(31);
    std::uniform_real_distribution<double> u(-4.0, 9.0);
    std::vector<double> v(57);
    for (auto& x : v) x = u(rng);
    auto out = minmax_normalize(v);
    double mn = *std::min_element(v.begin(), v.end());
    double mx = *std::max_element(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(out[i] == doctest::Approx((v[i] - mn) / (mx - mn)).epsilon(1e-13));
    // idempotence on non-constant input
    auto twice = minmax_normalize(out);
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(twice[i] == doctest::Approx(out[i]).epsilon(1e-12));
  }
  SUBCASE("constant spectrum rejected") {
    CHECK_THROWS_AS(minmax_normalize(std::vector<double>{3.0, 3.0, 3.0}),
                    ValidationError);
  }
  SUBCASE("normalized satellite spectrum carries the flag") {
    auto out = minmax_normalize(raw_spectrum());
    CHECK(out.normalized);
    out.validate();
  }
}

TEST_CASE("tile_crop") {
  auto make_scene = [](std::size_t h, std::size_t w) {
    SatelliteScene scene;
    scene.height = h;
    scene.width = w;
    SatelliteSpectrum px = raw_spectrum();
    px.reflectance.assign(kSatFilteredBands, 0.5);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        px.reflectance[0] = static_cast<double>(r * w + c);
        scene.pixels.push_back(px);
      }
    return scene;
  };
  SUBCASE("exact division") {
    auto tiles = tile_crop(make_scene(128, 128), 64);
    CHECK(tiles.size() == 4);
  }
  SUBCASE("single tile identity") {
    auto scene = make_scene(64, 64);
    auto tiles = tile_crop(scene, 64);
    REQUIRE(tiles.size() == 1);
    for (std::size_t i = 0; i < scene.pixels.size(); ++i)
      CHECK(tiles[0].pixels[i].reflectance[0] ==
            scene.pixels[i].reflectance[0]);
  }
  SUBCASE("ragged margins dropped") {
    auto tiles = tile_crop(make_scene(130, 70), 64);
    CHECK(tiles.size() == 2);  // floor(130/64) * floor(70/64)
  }
  SUBCASE("count formula on odd sizes") {
    auto tiles = tile_crop(make_scene(150, 200), 64);
    CHECK(tiles.size() == (150 / 64) * (200 / 64));
  }
  SUBCASE("scene smaller than a tile rejected") {
    CHECK_THROWS_AS(tile_crop(make_scene(32, 70), 64), ValidationError);
  }
}

TEST_CASE("assemble_student_input") {
  AncillaryFeatures a;
  a.sand_fraction = 0.4;
  a.clay_fraction = 0.3;
  a.temp_min = 5.0;
  a.temp_max = 25.0;
  a.temp_mean = 15.0;
  a.precip_min = 10.0;
  a.precip_max = 90.0;
  a.precip_mean = 40.0;

  SUBCASE("zero in, zero out") {
    AncillaryFeatures zero;
    std::vector<double> z(kLatentDim, 0.0);
    auto x = assemble_student_input(z, zero);
    CHECK(x.size() == kStudentInputWidth);
    for (double v : x) CHECK(v == 0.0);
  }
  SUBCASE("layout contract and round trip") {
    std::vector<double> z(kLatentDim);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 0.01 * (double)i - 0.3;
    auto x = assemble_student_input(z, a);
    for (std::size_t i = 0; i < kLatentDim; ++i) CHECK(x[i] == z[i]);
    auto av = a.to_vector();
    for (std::size_t i = 0; i < kAncillaryCount; ++i)
      CHECK(x[kLatentDim + i] == av[i]);
    // split back
    std::vector<double> z2(x.begin(), x.begin() + kLatentDim);
    std::vector<double> a2(x.begin() + kLatentDim, x.end());
    CHECK(z2 == z);
    CHECK(a2 == av);
  }
  SUBCASE("non-finite input rejected") {
    std::vector<double> z(kLatentDim, 0.0);
    z[5] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(assemble_student_input(z, a), ValidationError);
  }
  SUBCASE("sand + clay over one rejected") {
    AncillaryFeatures bad = a;
    bad.sand_fraction = 0.8;
    bad.clay_fraction = 0.5;
    std::vector<double> z(kLatentDim, 0.0);
    CHECK_THROWS_AS(assemble_student_input(z, bad), ValidationError);
  }
}

TEST_CASE("spectra file round trips") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "spectral_io_test";
  fs::create_directories(dir);

  SpectrumFile file;
  file.band_count = 5;
  auto rng = make_rng(77);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 9; ++i) {
    SpectrumRecord r;
    r.lat = 35.0 + 0.01 * i;
    r.lon = -110.0 + u(rng);
    if (i % 2 == 0) r.date = Date{2024, 3, 1 + i};
    if (i % 3 != 0) r.label = std::abs(u(rng)) * 20.0;
    for (int b = 0; b < 5; ++b) r.bands.push_back(u(rng));
    file.records.push_back(r);
  }

  SUBCASE("csv round trip is exact") {
    auto path = (dir / "t.csv").string();
    write_spectra_csv(path, file);
    auto back = read_spectra_csv(path);
    REQUIRE(back.records.size() == file.records.size());
    CHECK(back.band_count == file.band_count);
    for (std::size_t i = 0; i < file.records.size(); ++i) {
      CHECK(back.records[i].lat == file.records[i].lat);
      CHECK(back.records[i].lon == file.records[i].lon);
      CHECK(back.records[i].bands == file.records[i].bands);
      CHECK(back.records[i].label.has_value() ==
            file.records[i].label.has_value());
      if (file.records[i].label)
        CHECK(*back.records[i].label == *file.records[i].label);
      if (file.records[i].date)
        CHECK(back.records[i].date->to_string() ==
              file.records[i].date->to_string());
    }
  }

  SUBCASE("binary round trip is bit-exact") {
    auto path = (dir / "t.spc").string();
    write_spectra_bin(path, file);
    auto back = read_spectra_bin(path);
    REQUIRE(back.records.size() == file.records.size());
    for (std::size_t i = 0; i < file.records.size(); ++i)
      CHECK(back.records[i].bands == file.records[i].bands);
    // write again; files must be byte-identical
    auto path2 = (dir / "t2.spc").string();
    write_spectra_bin(path2, back);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)),
                   std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)),
                   std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
  }

  SUBCASE("bad magic rejected") {
    auto path = (dir / "bad.spc").string();
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
    out.close();
    CHECK_THROWS_AS(read_spectra_bin(path), ValidationError);
  }

  fs::remove_all(dir);
}
