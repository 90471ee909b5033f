#include "dancenet/geom.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <utility>

#include "dancenet/error.hpp"

namespace dancenet {

std::optional<std::size_t> PointCloud::channel(const std::string& name) const {
  for (std::size_t c = 0; c < feature_names.size(); ++c) {
    if (feature_names[c] == name) return c;
  }
  return std::nullopt;
}

void PointCloud::add_channel(const std::string& name, std::span<const double> values) {
  if (values.size() != size()) {
    fail(ErrorCode::kShape, "channel '" + name + "' has " + std::to_string(values.size()) +
                                " values for " + std::to_string(size()) + " points");
  }
  const std::size_t old_f = feature_count();
  std::vector<double> merged;
  merged.reserve(size() * (old_f + 1));
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t c = 0; c < old_f; ++c) merged.push_back(features[i * old_f + c]);
    merged.push_back(values[i]);
  }
  features = std::move(merged);
  feature_names.push_back(name);
}

void PointCloud::validate() const {
  if (features.size() != size() * feature_count()) {
    fail(ErrorCode::kShape, "feature matrix has " + std::to_string(features.size()) +
                                " entries, expected " + std::to_string(size()) + " x " +
                                std::to_string(feature_count()));
  }
  if (labels && labels->size() != size()) {
    fail(ErrorCode::kShape, "label vector length " + std::to_string(labels->size()) +
                                " does not match " + std::to_string(size()) + " points");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    const Vec3& p = positions[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      fail(ErrorCode::kNumeric, "non-finite coordinate at point " + std::to_string(i));
    }
  }
  if (labels) {
    for (std::size_t i = 0; i < labels->size(); ++i) {
      if ((*labels)[i] < 0) fail(ErrorCode::kLabel, "negative label at point " + std::to_string(i));
    }
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.feature_names = feature_names;
  const std::size_t f = feature_count();
  out.positions.reserve(indices.size());
  out.features.reserve(indices.size() * f);
  if (labels) out.labels.emplace().reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) fail(ErrorCode::kIndex, "subset index " + std::to_string(idx) + " out of range");
    out.positions.push_back(positions[idx]);
    auto row = feature_row(idx);
    out.features.insert(out.features.end(), row.begin(), row.end());
    if (labels) out.labels->push_back((*labels)[idx]);
  }
  return out;
}

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t count,
                                               std::size_t seed_index) {
  const std::size_t n = points.size();
  if (n == 0) fail(ErrorCode::kEmptyInput, "farthest_point_sample: empty point set");
  if (count == 0 || count > n) {
    fail(ErrorCode::kSize, "farthest_point_sample: requested " + std::to_string(count) +
                               " of " + std::to_string(n) + " points");
  }
  if (seed_index >= n) fail(ErrorCode::kIndex, "farthest_point_sample: seed index out of range");

  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t current = seed_index;
  for (;;) {
    picked.push_back(current);
    taken[current] = 1;
    if (picked.size() == count) break;
    const Vec3 c = points[current];
    std::size_t best = n;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d2 = squared_distance(points[i], c);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

namespace {

using Candidate = std::pair<double, std::size_t>;  // (squared distance, index)

void check_query_args(std::span<const Vec3> source, std::span<const std::size_t> centers,
                      double radius, std::size_t max_neighbors) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    fail(ErrorCode::kConfig, "ball_query: radius must be positive and finite");
  }
  if (max_neighbors == 0) fail(ErrorCode::kConfig, "ball_query: max_neighbors must be >= 1");
  for (std::size_t c : centers) {
    if (c >= source.size()) {
      fail(ErrorCode::kIndex, "ball_query: center index " + std::to_string(c) + " out of range");
    }
  }
}

void append_region(NeighborList& out, std::span<const Vec3> source, const Vec3& center,
                   std::size_t center_index, std::vector<Candidate>& found,
                   std::size_t max_neighbors) {
  if (found.empty()) found.emplace_back(0.0, center_index);
  if (found.size() > max_neighbors) {
    std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(max_neighbors),
                      found.end());
    found.resize(max_neighbors);
  } else {
    std::sort(found.begin(), found.end());
  }
  for (const auto& [d2, idx] : found) {
    out.indices.push_back(idx);
    out.offsets.push_back(source[idx] - center);
  }
  out.row_begin.push_back(out.indices.size());
}

// Hash grid with cells slightly larger than the query radius so every
// point within radius lies in the 27-cell neighborhood of the center cell.
class UniformGrid {
 public:
  UniformGrid(std::span<const Vec3> points, double cell) : cell_(cell) {
    origin_ = points[0];
    for (const Vec3& p : points) {
      origin_.x = std::min(origin_.x, p.x);
      origin_.y = std::min(origin_.y, p.y);
      origin_.z = std::min(origin_.z, p.z);
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [ix, iy, iz] = cell_of(points[i]);
      cells_[key(ix, iy, iz)].push_back(i);
    }
  }

  template <typename Fn>
  void for_each_near(const Vec3& p, Fn&& fn) const {
    const auto [cx, cy, cz] = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (std::size_t idx : it->second) fn(idx);
        }
      }
    }
  }

 private:
  struct Cell {
    std::int64_t x, y, z;
  };

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor((p.x - origin_.x) / cell_)),
            static_cast<std::int64_t>(std::floor((p.y - origin_.y) / cell_)),
            static_cast<std::int64_t>(std::floor((p.z - origin_.z) / cell_))};
  }

  static std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z) {
    // 21 bits per axis; offset keeps small negative neighbors distinct.
    constexpr std::int64_t kBias = 1 << 20;
    constexpr std::uint64_t kMask = (1u << 21) - 1;
    return ((static_cast<std::uint64_t>(x + kBias) & kMask) << 42) |
           ((static_cast<std::uint64_t>(y + kBias) & kMask) << 21) |
           (static_cast<std::uint64_t>(z + kBias) & kMask);
  }

  double cell_;
  Vec3 origin_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

NeighborList ball_query_exhaustive(std::span<const Vec3> source,
                                   std::span<const std::size_t> centers, double radius,
                                   std::size_t max_neighbors) {
  check_query_args(source, centers, radius, max_neighbors);
  const double r2 = radius * radius;
  NeighborList out;
  std::vector<Candidate> found;
  for (std::size_t c : centers) {
    found.clear();
    const Vec3 center = source[c];
    for (std::size_t j = 0; j < source.size(); ++j) {
      const double d2 = squared_distance(source[j], center);
      if (d2 <= r2) found.emplace_back(d2, j);
    }
    append_region(out, source, center, c, found, max_neighbors);
  }
  return out;
}

NeighborList ball_query(std::span<const Vec3> source, std::span<const std::size_t> centers,
                        double radius, std::size_t max_neighbors) {
  check_query_args(source, centers, radius, max_neighbors);
  // Below this work size the hash grid costs more than it saves.
  constexpr std::size_t kGridThreshold = 1u << 16;
  if (source.size() * centers.size() < kGridThreshold) {
    return ball_query_exhaustive(source, centers, radius, max_neighbors);
  }
  double span = 0.0;
  for (const Vec3& p : source) {
    span = std::max({span, std::abs(p.x - source[0].x), std::abs(p.y - source[0].y),
                     std::abs(p.z - source[0].z)});
  }
  // Cell coordinates must fit the 21-bit key packing.
  if (span / radius > static_cast<double>(1 << 19)) {
    return ball_query_exhaustive(source, centers, radius, max_neighbors);
  }

  const UniformGrid grid(source, radius * (1.0 + 1e-9));
  const double r2 = radius * radius;
  NeighborList out;
  std::vector<Candidate> found;
  for (std::size_t c : centers) {
    found.clear();
    const Vec3 center = source[c];
    grid.for_each_near(center, [&](std::size_t j) {
      const double d2 = squared_distance(source[j], center);
      if (d2 <= r2) found.emplace_back(d2, j);
    });
    append_region(out, source, center, c, found, max_neighbors);
  }
  return out;
}

NeighborList knn(std::span<const Vec3> source, std::span<const Vec3> queries, std::size_t k) {
  if (source.empty()) fail(ErrorCode::kEmptyInput, "knn: empty source set");
  if (k == 0) fail(ErrorCode::kConfig, "knn: k must be >= 1");
  const std::size_t keep = std::min(k, source.size());
  NeighborList out;
  out.indices.reserve(queries.size() * keep);
  out.offsets.reserve(queries.size() * keep);
  std::vector<Candidate> best;
  best.reserve(keep + 1);
  for (const Vec3& q : queries) {
    best.clear();
    for (std::size_t j = 0; j < source.size(); ++j) {
      const Candidate cand{squared_distance(source[j], q), j};
      if (best.size() == keep && !(cand < best.back())) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), cand);
      best.insert(pos, cand);
      if (best.size() > keep) best.pop_back();
    }
    for (const auto& [d2, idx] : best) {
      out.indices.push_back(idx);
      out.offsets.push_back(source[idx] - q);
    }
    out.row_begin.push_back(out.indices.size());
  }
  return out;
}

}  // namespace dancenet
