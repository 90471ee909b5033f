#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dancenet {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double squared_norm() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// N points with an N x F row-major feature matrix and optional labels.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<std::string> feature_names;
  std::vector<double> features;
  std::optional<std::vector<int>> labels;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  std::size_t feature_count() const { return feature_names.size(); }

  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_count(), feature_count()};
  }
  double feature(std::size_t i, std::size_t channel) const {
    return features[i * feature_count() + channel];
  }

  // Index of a named feature channel, or nullopt.
  std::optional<std::size_t> channel(const std::string& name) const;

  // Appends a named channel; values.size() must equal size().
  void add_channel(const std::string& name, std::span<const double> values);

  // Throws on row-count mismatches, non-finite coordinates or negative labels.
  void validate() const;

  // Rows selected by index, in the given order (repeats allowed).
  PointCloud subset(std::span<const std::size_t> indices) const;
};

// Compressed per-center membership: members of center c are
// indices[begin(c) .. end(c)), with offsets[k] = source[indices[k]] - center.
struct NeighborList {
  std::vector<std::size_t> row_begin{0};
  std::vector<std::size_t> indices;
  std::vector<Vec3> offsets;

  std::size_t centers() const { return row_begin.size() - 1; }
  std::size_t total() const { return indices.size(); }
  std::size_t begin(std::size_t c) const { return row_begin[c]; }
  std::size_t end(std::size_t c) const { return row_begin[c + 1]; }
  std::size_t count(std::size_t c) const { return end(c) - begin(c); }

  std::span<const std::size_t> members(std::size_t c) const {
    return {indices.data() + begin(c), count(c)};
  }
  std::span<const Vec3> member_offsets(std::size_t c) const {
    return {offsets.data() + begin(c), count(c)};
  }
};

inline constexpr std::size_t kDefaultMaxNeighbors = 32;

// Greedy max-min selection starting at seed_index. Ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t count,
                                               std::size_t seed_index = 0);

// Members within radius of each center, nearest max_neighbors kept, ordered
// by (distance, index). Uses a uniform grid when it pays off; membership is
// identical to ball_query_exhaustive.
NeighborList ball_query(std::span<const Vec3> source, std::span<const std::size_t> centers,
                        double radius, std::size_t max_neighbors = kDefaultMaxNeighbors);

// O(N*M) reference for ball_query.
NeighborList ball_query_exhaustive(std::span<const Vec3> source,
                                   std::span<const std::size_t> centers, double radius,
                                   std::size_t max_neighbors = kDefaultMaxNeighbors);

// k nearest source points per query, ordered by (distance, index).
NeighborList knn(std::span<const Vec3> source, std::span<const Vec3> queries, std::size_t k);

}  // namespace dancenet
