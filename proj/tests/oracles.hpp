#pragma once

// Reference implementations used only by the tests. Each one is the most
// direct transcription of its formula, with no shared code from the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "dancenet/error.hpp"
#include "dancenet/geom.hpp"
#include "dancenet/rng.hpp"

namespace oracle {

using dancenet::Vec3;

inline double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

// Recomputes every candidate's min distance to the picked set from scratch.
inline std::vector<std::size_t> greedy_maxmin(const std::vector<Vec3>& pts, std::size_t m, std::size_t seed) {
  std::vector<std::size_t> picked{seed};
  while (picked.size() < m) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t p : picked) dmin = std::min(dmin, dist(pts[i], pts[p]));
      if (dmin > best) {
        best = dmin;
        arg = i;
      }
    }
    picked.push_back(arg);
  }
  return picked;
}

// Sorted (distance, index) pairs of everything within r, then truncated.
inline std::vector<std::size_t> ball(const std::vector<Vec3>& pts, const Vec3& c, double r, std::size_t cap) {
  std::vector<std::pair<double, std::size_t>> hits;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = dist(pts[i], c);
    if (d <= r) hits.emplace_back(d, i);
  }
  std::sort(hits.begin(), hits.end());
  if (hits.size() > cap) hits.resize(cap);
  std::vector<std::size_t> out;
  for (auto& h : hits) out.push_back(h.second);
  return out;
}

inline double gauss3(double dx, double dy, double dz) {
  auto g1 = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); };
  return g1(dx) * g1(dy) * g1(dz);
}

inline double kde(const std::vector<Vec3>& members, const Vec3& q, double h) {
  double s = 0.0;
  for (const Vec3& p : members) s += gauss3((q.x - p.x) / h, (q.y - p.y) / h, (q.z - p.z) / h);
  return s / (static_cast<double>(members.size()) * h);
}

inline double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline std::vector<Vec3> random_points(dancenet::Rng& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
  return pts;
}

}  // namespace oracle

// Evaluates `expr` and checks it throws dancenet::Error with the given code.
#define CHECK_ERROR_CODE(expr, ec)                                   \
  do {                                                              \
    bool thrown_ = false;                                           \
    try {                                                           \
      (void)(expr);                                                 \
    } catch (const dancenet::Error& e_) {                           \
      thrown_ = true;                                               \
      CHECK(e_.code() == (ec));                                     \
    }                                                               \
    CHECK_MESSAGE(thrown_, "expected dancenet::Error from " #expr); \
  } while (0)
