#include "dancenet/density.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "dancenet/diff/ops.hpp"
#include "dancenet/error.hpp"
#include "dancenet/rng.hpp"

namespace dancenet {

namespace {

const double kGaussNorm = std::pow(2.0 * std::numbers::pi, -1.5);

}  // namespace

void DensityConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    fail(ErrorCode::kConfig, "KDE bandwidth must be positive and finite");
  }
}

double gaussian3(const Vec3& u) { return kGaussNorm * std::exp(-0.5 * u.squared_norm()); }

std::vector<double> local_kde(std::span<const Vec3> members, std::span<const Vec3> eval_points,
                              const DensityConfig& cfg) {
  cfg.validate();
  if (members.empty()) fail(ErrorCode::kEmptyInput, "local_kde: empty region");
  const double h = cfg.bandwidth;
  const double inv_h = 1.0 / h;
  const double norm = 1.0 / (static_cast<double>(members.size()) * h);
  std::vector<double> out;
  out.reserve(eval_points.size());
  for (const Vec3& q : eval_points) {
    double acc = 0.0;
    for (const Vec3& p : members) acc += gaussian3(inv_h * (q - p));
    out.push_back(norm * acc);
  }
  return out;
}

std::vector<double> region_densities(const NeighborList& regions, const DensityConfig& cfg) {
  std::vector<double> out;
  out.reserve(regions.total());
  for (std::size_t c = 0; c < regions.centers(); ++c) {
    auto offs = regions.member_offsets(c);
    auto d = local_kde(offs, offs, cfg);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

double point_density(std::span<const Vec3> points, const Vec3& query, double bandwidth) {
  DensityConfig{bandwidth}.validate();
  const double inv_h = 1.0 / bandwidth;
  double acc = 0.0;
  for (const Vec3& p : points) acc += gaussian3(inv_h * (query - p));
  return acc * inv_h * inv_h * inv_h;
}

void init_inverse_density(diff::ParamStore& store, const std::string& prefix, Rng& rng) {
  const std::array<std::size_t, 3> widths{1, kDensityHidden, 1};
  diff::mlp_init(store, prefix, widths, rng);
}

void set_inverse_density_constant(diff::ParamStore& store, const std::string& prefix, double value) {
  if (!(value > 0.0)) fail(ErrorCode::kConfig, "inverse density transform must stay positive");
  store.value(prefix + ".w0").fill(0.0);
  store.value(prefix + ".b0").fill(0.0);
  store.value(prefix + ".w1").fill(0.0);
  // softplus^{-1}(value)
  store.value(prefix + ".b1").fill(value > 30.0 ? value : std::log(std::expm1(value)));
}

diff::Var inverse_density_scale(diff::Tape& tape, diff::ParamStore& store,
                                const std::string& prefix, diff::Var densities) {
  for (double d : tape.value(densities).values()) {
    if (!std::isfinite(d) || d < 0.0) fail(ErrorCode::kNumeric, "inverse_density_scale: invalid density");
  }
  const std::array<std::size_t, 3> widths{1, kDensityHidden, 1};
  diff::Var t = diff::mlp_forward(tape, store, prefix, densities, widths, diff::Activation::kSoftplus);
  t = diff::clamp(tape, t, kPositivityFloor, std::numeric_limits<double>::infinity());
  return diff::reciprocal(tape, t);
}

}  // namespace dancenet
