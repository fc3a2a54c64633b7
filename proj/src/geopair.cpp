#include "spectral/geopair.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace spectral {

GeoPoint GeoPoint::from_degrees(const GeoLocation& loc) {
  loc.validate();
  constexpr double d2r = M_PI / 180.0;
  return {loc.lat_deg * d2r, loc.lon_deg * d2r};
}

void GeoPoint::validate() const {
  require(lat_rad >= -M_PI / 2 - 1e-12 && lat_rad <= M_PI / 2 + 1e-12,
          "geopoint: latitude outside [-pi/2, pi/2]");
  require(lon_rad >= -M_PI - 1e-12 && lon_rad <= M_PI + 1e-12,
          "geopoint: longitude outside [-pi, pi]");
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
  double sdlat = std::sin(0.5 * (b.lat_rad - a.lat_rad));
  double sdlon = std::sin(0.5 * (b.lon_rad - a.lon_rad));
  double h = sdlat * sdlat +
             std::cos(a.lat_rad) * std::cos(b.lat_rad) * sdlon * sdlon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * std::asin(std::sqrt(h));
}

BallTree::BallTree(const std::vector<GeoPoint>& points, std::size_t leaf_size)
    : points_(points), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  require(!points_.empty(), "ball tree: empty point set");
  for (const auto& p : points_) p.validate();
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
  root_ = build(0, points_.size());
}

std::int32_t BallTree::build(std::size_t begin, std::size_t end) {
  Node node;
  node.begin = static_cast<std::uint32_t>(begin);
  node.end = static_cast<std::uint32_t>(end);

  // Centroid in coordinate space; the radius uses true haversine
  // distances so triangle-inequality pruning stays valid.
  double clat = 0.0, clon = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    clat += points_[order_[i]].lat_rad;
    clon += points_[order_[i]].lon_rad;
  }
  double n = static_cast<double>(end - begin);
  node.center = {clat / n, clon / n};
  for (std::size_t i = begin; i < end; ++i)
    node.radius =
        std::max(node.radius, haversine(node.center, points_[order_[i]]));

  std::int32_t id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return id;

  // Split at the median of the wider coordinate.
  double min_lat = points_[order_[begin]].lat_rad, max_lat = min_lat;
  double min_lon = points_[order_[begin]].lon_rad, max_lon = min_lon;
  for (std::size_t i = begin + 1; i < end; ++i) {
    const auto& p = points_[order_[i]];
    min_lat = std::min(min_lat, p.lat_rad);
    max_lat = std::max(max_lat, p.lat_rad);
    min_lon = std::min(min_lon, p.lon_rad);
    max_lon = std::max(max_lon, p.lon_rad);
  }
  bool by_lat = (max_lat - min_lat) >= (max_lon - min_lon);
  std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const auto& pa = points_[a];
                     const auto& pb = points_[b];
                     double ka = by_lat ? pa.lat_rad : pa.lon_rad;
                     double kb = by_lat ? pb.lat_rad : pb.lon_rad;
                     if (ka != kb) return ka < kb;
                     return a < b;  // stable under duplicates
                   });
  std::int32_t left = build(begin, mid);
  std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

BallTree::Result BallTree::nearest(const GeoPoint& query) const {
  query.validate();
  Result best;
  search(root_, query, best);
  return best;
}

void BallTree::search(std::int32_t node_id, const GeoPoint& q,
                      Result& best) const {
  const Node& node = nodes_[node_id];
  // Triangle inequality: nothing in the ball can be closer than this.
  double lower = haversine(q, node.center) - node.radius;
  if (lower > best.distance) return;

  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      std::uint32_t idx = order_[i];
      double d = haversine(q, points_[idx]);
      if (d < best.distance ||
          (d == best.distance && idx < best.index)) {
        best.distance = d;
        best.index = idx;
      }
    }
    return;
  }
  double dl = haversine(q, nodes_[node.left].center);
  double dr = haversine(q, nodes_[node.right].center);
  if (dl <= dr) {
    search(node.left, q, best);
    search(node.right, q, best);
  } else {
    search(node.right, q, best);
    search(node.left, q, best);
  }
}

std::size_t BallTree::height_of(std::int32_t node) const {
  if (node < 0) return 0;
  const Node& n = nodes_[node];
  if (n.left < 0) return 1;
  return 1 + std::max(height_of(n.left), height_of(n.right));
}

std::size_t BallTree::height() const { return height_of(root_); }

std::vector<PairedSample> make_pairs(const std::vector<GeoPoint>& ftir,
                                     const std::vector<GeoPoint>& sat,
                                     double tau) {
  std::vector<PairedSample> pairs;
  if (ftir.empty() || sat.empty()) return pairs;
  BallTree index(sat);
  for (std::size_t i = 0; i < ftir.size(); ++i) {
    auto hit = index.nearest(ftir[i]);
    if (hit.distance <= tau)
      pairs.push_back({i, hit.index, hit.distance});
  }
  return pairs;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw ValidationError("split: unknown name '" + s + "'");
}

std::size_t salinity_stratum(double salinity) {
  if (salinity <= 0.0) return 0;
  if (salinity <= 2.0) return 1;
  if (salinity <= 10.0) return 2;
  return 3;
}

namespace {

double sq_dist(const GeoLocation& p, const std::array<double, 2>& c) {
  double dl = p.lat_deg - c[0], dn = p.lon_deg - c[1];
  return dl * dl + dn * dn;
}

}  // namespace

KMeansResult kmeans_locations(const std::vector<GeoLocation>& points,
                              std::size_t k, std::uint64_t seed,
                              std::size_t max_iters, double tol) {
  require(k >= 1, "kmeans: k must be positive");
  require(points.size() >= k, "kmeans: k exceeds the sample count");
  auto rng = make_rng(seed, 0x6b6d);
  KMeansResult res;

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
  std::size_t f = first(rng);
  res.centroids.push_back({points[f].lat_deg, points[f].lon_deg});
  std::vector<double> d2(points.size());
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = sq_dist(points[i], res.centroids[0]);
      for (std::size_t c = 1; c < res.centroids.size(); ++c)
        best = std::min(best, sq_dist(points[i], res.centroids[c]));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all remaining points coincide with a centroid
      res.centroids.push_back(res.centroids.back());
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0.0;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      acc += d2[i];
      if (acc >= target) {
        chosen = i;
        break;
      }
    }
    res.centroids.push_back({points[chosen].lat_deg, points[chosen].lon_deg});
  }

  res.assignment.assign(points.size(), 0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    res.iterations = it + 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double bd = sq_dist(points[i], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double d = sq_dist(points[i], res.centroids[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      res.assignment[i] = static_cast<std::uint32_t>(best);
    }
    std::vector<std::array<double, 2>> next(k, {0.0, 0.0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      next[res.assignment[i]][0] += points[i].lat_deg;
      next[res.assignment[i]][1] += points[i].lon_deg;
      ++counts[res.assignment[i]];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      next[c][0] /= static_cast<double>(counts[c]);
      next[c][1] /= static_cast<double>(counts[c]);
      moved = std::max(moved, std::sqrt(sq_dist(
                                  GeoLocation{next[c][0], next[c][1]},
                                  res.centroids[c])));
      res.centroids[c] = next[c];
    }
    if (moved < tol) break;
  }
  // Final assignment against the converged centroids.
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = 0;
    double bd = sq_dist(points[i], res.centroids[0]);
    for (std::size_t c = 1; c < k; ++c) {
      double d = sq_dist(points[i], res.centroids[c]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    res.assignment[i] = static_cast<std::uint32_t>(best);
  }
  return res;
}

SplitAssignment spatial_split(const std::vector<GeoLocation>& locations,
                              const std::vector<double>& salinity,
                              std::size_t k, std::array<double, 3> fractions,
                              std::uint64_t seed) {
  require(locations.size() == salinity.size(),
          "spatial_split: location/label count mismatch");
  require(locations.size() >= k, "spatial_split: k exceeds sample count");
  double fsum = fractions[0] + fractions[1] + fractions[2];
  require(std::abs(fsum - 1.0) < 1e-9, "spatial_split: fractions must sum to 1");

  auto km = kmeans_locations(locations, k, seed);
  SplitAssignment out;
  out.cluster = km.assignment;
  out.centroids = km.centroids;
  out.split.assign(locations.size(), Split::train);

  auto rng = make_rng(seed, 0x5197);

  // Largest-remainder apportionment inside every (cluster, stratum)
  // group keeps each proportion within one sample.
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t s = 0; s < kStrataCount; ++s) {
      std::vector<std::size_t> group;
      for (std::size_t i = 0; i < locations.size(); ++i)
        if (out.cluster[i] == c && salinity_stratum(salinity[i]) == s)
          group.push_back(i);
      if (group.empty()) continue;
      std::shuffle(group.begin(), group.end(), rng);

      std::size_t n = group.size();
      std::array<std::size_t, 3> counts{};
      std::array<double, 3> remainder{};
      std::size_t assigned = 0;
      for (int part = 0; part < 3; ++part) {
        double exact = fractions[part] * static_cast<double>(n);
        counts[part] = static_cast<std::size_t>(std::floor(exact));
        remainder[part] = exact - std::floor(exact);
        assigned += counts[part];
      }
      while (assigned < n) {
        int best = 0;
        for (int part = 1; part < 3; ++part)
          if (remainder[part] > remainder[best]) best = part;
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
      }
      std::size_t idx = 0;
      for (int part = 0; part < 3; ++part)
        for (std::size_t j = 0; j < counts[part]; ++j)
          out.split[group[idx++]] = static_cast<Split>(part);
    }
  }
  return out;
}

std::size_t audit_split(const std::vector<GeoLocation>& locations,
                        const SplitAssignment& assignment) {
  require(locations.size() == assignment.split.size() &&
              locations.size() == assignment.cluster.size(),
          "audit: size mismatch");
  std::size_t contaminated = 0;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    std::size_t best = 0;
    double bd = sq_dist(locations[i], assignment.centroids[0]);
    for (std::size_t c = 1; c < assignment.centroids.size(); ++c) {
      double d = sq_dist(locations[i], assignment.centroids[c]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    if (best != assignment.cluster[i]) ++contaminated;
  }
  return contaminated;
}

std::vector<std::size_t> undersample_zeros(
    const std::vector<std::size_t>& train_indices,
    const std::vector<double>& salinity, double keep_fraction,
    std::uint64_t seed) {
  require(keep_fraction >= 0.0 && keep_fraction <= 1.0,
          "undersample: keep fraction outside [0,1]");
  std::vector<std::size_t> zeros, nonzeros;
  for (auto i : train_indices) {
    require(i < salinity.size(), "undersample: index out of range");
    (salinity[i] == 0.0 ? zeros : nonzeros).push_back(i);
  }
  std::size_t keep =
      static_cast<std::size_t>(std::llround(keep_fraction * zeros.size()));
  auto rng = make_rng(seed, 0x2e05);
  std::shuffle(zeros.begin(), zeros.end(), rng);
  zeros.resize(keep);
  std::vector<std::size_t> kept(zeros.begin(), zeros.end());
  kept.insert(kept.end(), nonzeros.begin(), nonzeros.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

void write_pairs_csv(const std::string& path,
                     const std::vector<PairedSample>& pairs) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out << "ftir_id,sat_id,distance_rad\n";
  for (const auto& p : pairs)
    out << p.ftir_index << ',' << p.sat_index << ','
        << format_double(p.distance_rad) << '\n';
  require(out.good(), "write failed: " + path);
}

std::vector<PairedSample> read_pairs_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) &&
              line == "ftir_id,sat_id,distance_rad",
          "pairs csv: bad header in " + path);
  std::vector<PairedSample> pairs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    require(f.size() == 3, "pairs csv: ragged row");
    pairs.push_back({static_cast<std::size_t>(std::stoull(f[0])),
                     static_cast<std::size_t>(std::stoull(f[1])),
                     std::stod(f[2])});
  }
  return pairs;
}

void write_split_csv(const std::string& path, const SplitAssignment& a) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out << "sample_id,cluster,split\n";
  for (std::size_t i = 0; i < a.split.size(); ++i)
    out << i << ',' << a.cluster[i] << ',' << split_name(a.split[i]) << '\n';
  out << "# centroids";
  for (const auto& c : a.centroids)
    out << ' ' << format_double(c[0]) << ':' << format_double(c[1]);
  out << '\n';
  require(out.good(), "write failed: " + path);
}

SplitAssignment read_split_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) &&
              line == "sample_id,cluster,split",
          "split csv: bad header in " + path);
  SplitAssignment a;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (starts_with(line, "# centroids")) {
      std::size_t pos = std::string("# centroids").size();
      while (pos < line.size()) {
        while (pos < line.size() && line[pos] == ' ') ++pos;
        if (pos >= line.size()) break;
        std::size_t colon = line.find(':', pos);
        std::size_t space = line.find(' ', pos);
        if (space == std::string::npos) space = line.size();
        require(colon != std::string::npos && colon < space,
                "split csv: malformed centroid");
        a.centroids.push_back({std::stod(line.substr(pos, colon - pos)),
                               std::stod(line.substr(colon + 1, space - colon - 1))});
        pos = space;
      }
      continue;
    }
    auto f = split_csv_line(line);
    require(f.size() == 3, "split csv: ragged row");
    require(std::stoull(f[0]) == a.split.size(), "split csv: ids out of order");
    a.cluster.push_back(static_cast<std::uint32_t>(std::stoul(f[1])));
    a.split.push_back(parse_split(f[2]));
  }
  return a;
}

}  // namespace spectral
