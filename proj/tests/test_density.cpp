#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"

#include "dancenet/density.hpp"
#include "dancenet/diff/grad_check.hpp"
#include "dancenet/diff/ops.hpp"
#include "dancenet/diff/param_store.hpp"

using dancenet::DensityConfig;
using dancenet::ErrorCode;
using dancenet::Rng;
using dancenet::Vec3;
namespace diff = dancenet::diff;
using diff::Tensor;

TEST_SUITE("density") {

TEST_CASE("single member at its own center") {
  const std::vector<Vec3> m{{0, 0, 0}};
  const auto d = dancenet::local_kde(m, m, DensityConfig{1.0});
  CHECK(d[0] == doctest::Approx(0.0634936).epsilon(1e-6));
  CHECK(std::abs(d[0] - std::pow(2.0 * std::numbers::pi, -1.5)) < 1e-15);
}

TEST_CASE("kde matches the direct sum") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(12);
    const auto members = oracle::random_points(rng, n, -2.0, 2.0);
    const auto evals = oracle::random_points(rng, 4, -2.0, 2.0);
    const double h = rng.uniform(0.2, 2.0);
    const auto got = dancenet::local_kde(members, evals, DensityConfig{h});
    for (std::size_t q = 0; q < evals.size(); ++q) {
      CHECK(oracle::rel(got[q], oracle::kde(members, evals[q], h)) < 1e-12);
    }
  }
}

TEST_CASE("far field vanishes") {
  const std::vector<Vec3> m{{0, 0, 0}, {0.1, 0, 0}};
  const std::vector<Vec3> q{{10.2, 0, 0}};
  CHECK(dancenet::local_kde(m, q, DensityConfig{1.0})[0] < 1e-12);
}

TEST_CASE("symmetry and translation invariance") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
    const Vec3 q{rng.uniform(), rng.uniform(), rng.uniform()};
    const std::vector<Vec3> a{p}, b{q};
    CHECK(dancenet::local_kde(a, b, {0.7})[0] == dancenet::local_kde(b, a, {0.7})[0]);

    auto members = oracle::random_points(rng, 6, -1.0, 1.0);
    const Vec3 shift{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
    auto moved = members;
    for (auto& m : moved) m = m + shift;
    const auto d0 = dancenet::local_kde(members, members, {0.5});
    const auto d1 = dancenet::local_kde(moved, moved, {0.5});
    for (std::size_t i = 0; i < d0.size(); ++i) CHECK(oracle::rel(d0[i], d1[i]) < 1e-12);
  }
}

TEST_CASE("permuting members permutes densities") {
  Rng rng(9);
  auto members = oracle::random_points(rng, 7);
  const auto d = dancenet::local_kde(members, members, {0.4});
  std::reverse(members.begin(), members.end());
  const auto r = dancenet::local_kde(members, members, {0.4});
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(oracle::rel(d[i], r[d.size() - 1 - i]) < 1e-12);
}

TEST_CASE("region densities follow member order") {
  const std::vector<Vec3> pts{{0, 0, 0}, {0.5, 0, 0}, {3, 0, 0}};
  const std::vector<std::size_t> centers{0, 2};
  const auto nl = dancenet::ball_query(pts, centers, 1.0, 8);
  const auto d = dancenet::region_densities(nl, {1.0});
  REQUIRE(d.size() == 3);
  const std::vector<Vec3> r0{{0, 0, 0}, {0.5, 0, 0}};
  CHECK(oracle::rel(d[0], oracle::kde(r0, r0[0], 1.0)) < 1e-12);
  CHECK(oracle::rel(d[1], oracle::kde(r0, r0[1], 1.0)) < 1e-12);
  CHECK(oracle::rel(d[2], std::pow(2.0 * std::numbers::pi, -1.5)) < 1e-12);
}

TEST_CASE("kde errors") {
  const std::vector<Vec3> m{{0, 0, 0}};
  CHECK_ERROR_CODE(dancenet::local_kde(m, m, {0.0}), ErrorCode::kConfig);
  CHECK_ERROR_CODE(dancenet::local_kde(m, m, {-1.0}), ErrorCode::kConfig);
  CHECK_ERROR_CODE(dancenet::local_kde({}, m, {1.0}), ErrorCode::kEmptyInput);
}

TEST_CASE("inverse density scale") {
  diff::ParamStore store;
  Rng rng(1);
  dancenet::init_inverse_density(store, "t", rng);
  const std::vector<double> dens{0.0, 0.5, 0.063, 4.0};

  auto scale_of = [&] {
    diff::Tape tape(diff::TapeMode::kInference);
    auto v = dancenet::inverse_density_scale(tape, store, "t", tape.constant(Tensor::column(dens)));
    return tape.value(v);
  };

  SUBCASE("unit transform gives unit scale") {
    dancenet::set_inverse_density_constant(store, "t", 1.0);
    const Tensor out = scale_of();
    for (double s : out.values()) CHECK(std::abs(s - 1.0) < 1e-12);
  }
  SUBCASE("transform 0.5 gives scale 2") {
    dancenet::set_inverse_density_constant(store, "t", 0.5);
    CHECK(std::abs(scale_of()[1] - 2.0) < 1e-12);
  }
  SUBCASE("positive and finite under random weights") {
    for (int t = 0; t < 20; ++t) {
      for (std::size_t i = 0; i < store.size(); ++i) {
        for (double& v : store.value(i).values()) v = rng.uniform(-5, 5);
      }
      const Tensor out = scale_of();
      for (double s : out.values()) {
        CHECK(s > 0.0);
        CHECK(std::isfinite(s));
        CHECK(s <= 1.0 / dancenet::kPositivityFloor + 1e-9);
      }
    }
  }
  SUBCASE("gradient matches finite differences") {
    for (double& v : store.value("t.b0").values()) v = rng.uniform(0.05, 0.3);
    for (double& v : store.value("t.b1").values()) v = rng.uniform(-0.3, 0.3);
    const auto rep = diff::grad_check(
        [&](diff::Tape& tape, diff::ParamStore& s) {
          auto v = dancenet::inverse_density_scale(tape, s, "t", tape.constant(Tensor::column(dens)));
          return diff::sum(tape, v);
        },
        store);
    CHECK(rep.max_rel_error < 1e-4);
  }
  SUBCASE("invalid densities") {
    diff::Tape tape;
    auto bad = tape.constant(Tensor::column({-1.0}));
    CHECK_ERROR_CODE(dancenet::inverse_density_scale(tape, store, "t", bad), ErrorCode::kNumeric);
    auto nan = tape.constant(Tensor::column({std::nan("")}));
    CHECK_ERROR_CODE(dancenet::inverse_density_scale(tape, store, "t", nan), ErrorCode::kNumeric);
  }
}

TEST_CASE("point density counts per cubic meter") {
  // A dense uniform lattice at spacing s has density 1/s^3 in its interior.
  std::vector<Vec3> pts;
  const double s = 0.25;
  for (int i = -40; i <= 40; ++i)
    for (int j = -40; j <= 40; ++j)
      for (int k = -40; k <= 40; ++k) pts.push_back({i * s, j * s, k * s});
  CHECK(dancenet::point_density(pts, {0, 0, 0}, 1.0) == doctest::Approx(64.0).epsilon(1e-6));
}

}  // TEST_SUITE
