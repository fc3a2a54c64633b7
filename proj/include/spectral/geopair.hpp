#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "spectral/spectra.hpp"

namespace spectral {

constexpr double kPairTauRad = 0.000157;     // ~1 km central angle
constexpr double kEarthRadiusKm = 6371.0088;  // mean radius

struct GeoPoint {
  double lat_rad = 0.0;
  double lon_rad = 0.0;

  static GeoPoint from_degrees(const GeoLocation& loc);
  void validate() const;
};

/// Great-circle central angle in radians; a metric on the sphere.
double haversine(const GeoPoint& a, const GeoPoint& b);

/// Metric ball tree over the haversine distance. Median splits along the
/// wider coordinate keep the depth logarithmic; queries prune subtrees by
/// the triangle inequality.
class BallTree {
 public:
  explicit BallTree(const std::vector<GeoPoint>& points,
                    std::size_t leaf_size = 8);

  struct Result {
    std::size_t index = 0;
    double distance = std::numeric_limits<double>::infinity();
  };
  /// Index of the nearest point; exact ties break toward the lower index.
  Result nearest(const GeoPoint& query) const;

  std::size_t size() const { return points_.size(); }
  std::size_t height() const;

 private:
  struct Node {
    GeoPoint center;
    double radius = 0.0;
    std::int32_t left = -1, right = -1;  // children; -1 for leaves
    std::uint32_t begin = 0, end = 0;    // leaf range into order_
  };

  std::int32_t build(std::size_t begin, std::size_t end);
  void search(std::int32_t node, const GeoPoint& q, Result& best) const;
  std::size_t height_of(std::int32_t node) const;

  std::vector<GeoPoint> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
  std::size_t leaf_size_;
};

struct PairedSample {
  std::size_t ftir_index = 0;
  std::size_t sat_index = 0;
  double distance_rad = 0.0;
};

/// Pairs every FTIR sample with its nearest satellite sample when the
/// haversine distance is within tau; unpaired samples are dropped.
/// Candidates are assumed loader-validated (complete measurements, valid
/// geolocation, corrected spectra).
std::vector<PairedSample> make_pairs(const std::vector<GeoPoint>& ftir,
                                     const std::vector<GeoPoint>& sat,
                                     double tau = kPairTauRad);

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

const char* split_name(Split s);
Split parse_split(const std::string& s);

struct SplitAssignment {
  std::vector<Split> split;          // per sample
  std::vector<std::uint32_t> cluster;  // per sample
  std::vector<std::array<double, 2>> centroids;  // (lat, lon) degrees
};

/// Salinity stratum used for stratified allocation:
/// 0, (0,2], (2,10], >10 dS/m.
std::size_t salinity_stratum(double salinity);
constexpr std::size_t kStrataCount = 4;

struct KMeansResult {
  std::vector<std::uint32_t> assignment;
  std::vector<std::array<double, 2>> centroids;
  std::size_t iterations = 0;
};

/// Seeded k-means++ over (lat, lon) degrees; Lloyd iterations with a
/// centroid-movement tolerance.
KMeansResult kmeans_locations(const std::vector<GeoLocation>& points,
                              std::size_t k, std::uint64_t seed,
                              std::size_t max_iters = 50, double tol = 1e-6);

/// Spatial k-means clustering followed by per-cluster stratified
/// allocation over the salinity strata. Proportions hold within one
/// sample per (cluster, stratum) group.
SplitAssignment spatial_split(const std::vector<GeoLocation>& locations,
                              const std::vector<double>& salinity,
                              std::size_t k, std::array<double, 3> fractions,
                              std::uint64_t seed);

/// Number of samples whose recorded cluster is not the nearest centroid;
/// zero on a sound assignment.
std::size_t audit_split(const std::vector<GeoLocation>& locations,
                        const SplitAssignment& assignment);

/// Keeps a seeded fraction of zero-salinity indices and all nonzero ones;
/// relative order is preserved. The retained count is round(n_zero * keep).
std::vector<std::size_t> undersample_zeros(
    const std::vector<std::size_t>& train_indices,
    const std::vector<double>& salinity, double keep_fraction,
    std::uint64_t seed);

// ---- persistence ---------------------------------------------------------

void write_pairs_csv(const std::string& path,
                     const std::vector<PairedSample>& pairs);
std::vector<PairedSample> read_pairs_csv(const std::string& path);

void write_split_csv(const std::string& path, const SplitAssignment& a);
SplitAssignment read_split_csv(const std::string& path);

}  // namespace spectral
