#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "spectral/geopair.hpp"

using namespace spectral;

namespace {

std::vector<GeoPoint> random_points(std::size_t n, std::uint64_t seed,
                                    double lat0 = 30.0, double lat1 = 40.0,
                                    double lon0 = -115.0, double lon1 = -105.0) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> ulat(lat0, lat1), ulon(lon0, lon1);
  std::vector<GeoPoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back(GeoPoint::from_degrees({ulat(rng), ulon(rng)}));
  return pts;
}

std::size_t brute_force_nearest(const std::vector<GeoPoint>& pts,
                                const GeoPoint& q, double* dist = nullptr) {
  std::size_t best = 0;
  double bd = haversine(q, pts[0]);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double d = haversine(q, pts[i]);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  if (dist) *dist = bd;
  return best;
}

}  // namespace

TEST_CASE("haversine") {
  GeoPoint origin{0.0, 0.0};
  SUBCASE("identity") { CHECK(haversine(origin, origin) == 0.0); }
  SUBCASE("antipodal on the equator") {
    CHECK(haversine(origin, {0.0, M_PI}) == doctest::Approx(M_PI).epsilon(1e-12));
  }
  SUBCASE("tau corresponds to about one kilometre") {
    double angle = haversine(origin, {0.0, kPairTauRad});
    CHECK(angle == doctest::Approx(kPairTauRad).epsilon(1e-9));
    double km = angle * kEarthRadiusKm;
    CHECK(km == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("symmetry and triangle inequality on random triples") {
    auto pts = random_points(30, 5, -60, 60, -170, 170);
    for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
      const auto &a = pts[i], &b = pts[i + 1], &c = pts[i + 2];
      CHECK(haversine(a, b) == doctest::Approx(haversine(b, a)).epsilon(1e-14));
      CHECK(haversine(a, c) <= haversine(a, b) + haversine(b, c) + 1e-12);
      CHECK(haversine(a, b) >= 0.0);
      CHECK(haversine(a, b) <= M_PI + 1e-12);
    }
  }
}

TEST_CASE("ball tree") {
  SUBCASE("single point") {
    BallTree tree({GeoPoint::from_degrees({35.0, -110.0})});
    auto r = tree.nearest(GeoPoint::from_degrees({39.0, -100.0}));
    CHECK(r.index == 0);
  }
  SUBCASE("empty rejected") {
    CHECK_THROWS_AS(BallTree(std::vector<GeoPoint>{}), ValidationError);
  }
  SUBCASE("queries match brute force on 1000 random points") {
    auto pts = random_points(1000, 9);
    BallTree tree(pts);
    auto queries = random_points(500, 10);
    for (const auto& q : queries) {
      auto r = tree.nearest(q);
      double bd;
      std::size_t bi = brute_force_nearest(pts, q, &bd);
      CHECK(r.index == bi);
      CHECK(r.distance == doctest::Approx(bd).epsilon(1e-15));
    }
    // points themselves resolve to themselves
    for (std::size_t i = 0; i < 100; ++i) {
      auto r = tree.nearest(pts[i]);
      CHECK(r.index == i);
      CHECK(r.distance == 0.0);
    }
  }
  SUBCASE("height stays logarithmic under median splits") {
    for (std::size_t n : {64, 257, 1000, 4096}) {
      auto pts = random_points(n, 100 + n);
      BallTree tree(pts, 1);
      auto bound = static_cast<std::size_t>(
                       std::ceil(std::log2(static_cast<double>(n)))) + 2;
      CHECK(tree.height() <= bound);
    }
  }
}

TEST_CASE("make_pairs") {
  SUBCASE("collocated points pair at distance zero") {
    auto loc = GeoPoint::from_degrees({35.0, -110.0});
    auto pairs = make_pairs({loc}, {loc});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].distance_rad == 0.0);
    CHECK(pairs[0].sat_index == 0);
  }
  SUBCASE("nearest neighbor two kilometres away is excluded") {
    auto f = GeoPoint::from_degrees({35.0, -110.0});
    // ~2 km north
    auto s = GeoPoint{f.lat_rad + 2.0 / kEarthRadiusKm, f.lon_rad};
    CHECK(make_pairs({f}, {s}).empty());
  }
  SUBCASE("equals brute-force all-pairs filter on 500 seeded points") {
    // dense box so some pairs fall under tau
    auto ftir = random_points(500, 21, 35.0, 35.05, -110.05, -110.0);
    auto sat = random_points(500, 22, 35.0, 35.05, -110.05, -110.0);
    auto pairs = make_pairs(ftir, sat);
    std::set<std::tuple<std::size_t, std::size_t>> got;
    for (const auto& p : pairs) got.insert({p.ftir_index, p.sat_index});
    std::set<std::tuple<std::size_t, std::size_t>> expect;
    for (std::size_t i = 0; i < ftir.size(); ++i) {
      double bd;
      std::size_t bi = brute_force_nearest(sat, ftir[i], &bd);
      if (bd <= kPairTauRad) expect.insert({i, bi});
    }
    CHECK(!expect.empty());
    CHECK(got == expect);
  }
  SUBCASE("empty result allowed") {
    auto ftir = random_points(10, 31, 35.0, 36.0, -110.0, -109.0);
    auto sat = random_points(10, 32, 45.0, 46.0, -90.0, -89.0);
    CHECK(make_pairs(ftir, sat).empty());
  }
}

TEST_CASE("spatial split") {
  // three planted clusters of 100 points each
  auto make_planted = [](std::vector<GeoLocation>& locs,
                         std::vector<double>& sal) {
    auto rng = make_rng(17);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double centers[3][2] = {{33.0, -112.0}, {37.0, -108.0}, {41.0, -104.0}};
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 100; ++i) {
        locs.push_back({centers[c][0] + jitter(rng), centers[c][1] + jitter(rng)});
        double r = u01(rng);
        sal.push_back(r < 0.4 ? 0.0 : (r < 0.7 ? 1.0 : (r < 0.9 ? 5.0 : 20.0)));
      }
  };
  std::vector<GeoLocation> locs;
  std::vector<double> sal;
  make_planted(locs, sal);

  SUBCASE("recovers planted clusters with clean stratified proportions") {
    auto a = spatial_split(locs, sal, 3, {0.8, 0.1, 0.1}, 7);
    // each planted group lands in exactly one cluster
    for (int c = 0; c < 3; ++c) {
      std::set<std::uint32_t> ids;
      for (int i = 0; i < 100; ++i) ids.insert(a.cluster[c * 100 + i]);
      CHECK(ids.size() == 1);
    }
    CHECK(audit_split(locs, a) == 0);
    // per-cluster proportions within one sample per stratum
    for (std::uint32_t c = 0; c < 3; ++c) {
      for (std::size_t s = 0; s < kStrataCount; ++s) {
        std::size_t n = 0, tr = 0, va = 0, te = 0;
        for (std::size_t i = 0; i < locs.size(); ++i) {
          if (a.cluster[i] != c || salinity_stratum(sal[i]) != s) continue;
          ++n;
          if (a.split[i] == Split::train) ++tr;
          if (a.split[i] == Split::validation) ++va;
          if (a.split[i] == Split::test) ++te;
        }
        if (n == 0) continue;
        CHECK(std::abs((double)tr - 0.8 * (double)n) <= 1.0);
        CHECK(std::abs((double)va - 0.1 * (double)n) <= 1.0);
        CHECK(std::abs((double)te - 0.1 * (double)n) <= 1.0);
      }
    }
  }

  SUBCASE("deterministic for a fixed seed") {
    auto a = spatial_split(locs, sal, 3, {0.8, 0.1, 0.1}, 11);
    auto b = spatial_split(locs, sal, 3, {0.8, 0.1, 0.1}, 11);
    CHECK(a.split == b.split);
    CHECK(a.cluster == b.cluster);
    auto c = spatial_split(locs, sal, 3, {0.8, 0.1, 0.1}, 12);
    CHECK(a.split != c.split);  // different seed shuffles differently
  }

  SUBCASE("partition contract") {
    auto a = spatial_split(locs, sal, 3, {0.8, 0.1, 0.1}, 3);
    CHECK(a.split.size() == locs.size());  // every sample exactly once
  }

  SUBCASE("k larger than sample count rejected") {
    std::vector<GeoLocation> two = {{35, -110}, {36, -111}};
    std::vector<double> two_s = {0.0, 1.0};
    CHECK_THROWS_AS(spatial_split(two, two_s, 3, {0.8, 0.1, 0.1}, 1),
                    ValidationError);
  }
}

TEST_CASE("undersample_zeros") {
  std::vector<double> sal;
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < 1500; ++i) {
    sal.push_back(i < 1000 ? 0.0 : 3.5);
    train.push_back(i);
  }
  SUBCASE("exact arithmetic of the contract") {
    auto kept = undersample_zeros(train, sal, 0.10, 5);
    CHECK(kept.size() == 600);
    std::size_t zeros = 0;
    for (auto i : kept)
      if (sal[i] == 0.0) ++zeros;
    CHECK(zeros == 100);
  }
  SUBCASE("no zeros present is the identity") {
    std::vector<std::size_t> nz(train.begin() + 1000, train.end());
    auto kept = undersample_zeros(nz, sal, 0.10, 5);
    CHECK(kept == nz);
  }
  SUBCASE("seed determinism") {
    auto a = undersample_zeros(train, sal, 0.10, 9);
    auto b = undersample_zeros(train, sal, 0.10, 9);
    CHECK(a == b);
    auto c = undersample_zeros(train, sal, 0.10, 10);
    CHECK(a != c);
  }
}

TEST_CASE("pair and split manifests round trip") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "spectral_geo_test";
  fs::create_directories(dir);

  std::vector<PairedSample> pairs = {{0, 3, 0.0001}, {2, 1, 1.5e-5}};
  auto ppath = (dir / "pairs.csv").string();
  write_pairs_csv(ppath, pairs);
  auto pback = read_pairs_csv(ppath);
  REQUIRE(pback.size() == 2);
  CHECK(pback[1].ftir_index == 2);
  CHECK(pback[1].distance_rad == pairs[1].distance_rad);

  SplitAssignment a;
  a.split = {Split::train, Split::test, Split::validation};
  a.cluster = {0, 1, 1};
  a.centroids = {{35.5, -110.25}, {37.0, -108.0}};
  auto spath = (dir / "split.csv").string();
  write_split_csv(spath, a);
  auto sback = read_split_csv(spath);
  CHECK(sback.split == a.split);
  CHECK(sback.cluster == a.cluster);
  REQUIRE(sback.centroids.size() == 2);
  CHECK(sback.centroids[0][0] == a.centroids[0][0]);
  CHECK(sback.centroids[1][1] == a.centroids[1][1]);

  fs::remove_all(dir);
}
