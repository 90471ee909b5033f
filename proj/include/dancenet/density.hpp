#pragma once

#include <span>
#include <string>
#include <vector>

#include "dancenet/diff/tape.hpp"
#include "dancenet/geom.hpp"

namespace dancenet {
class Rng;

struct DensityConfig {
  double bandwidth = 1.0;  // meters

  void validate() const;
};

// Standard trivariate Gaussian, (2 pi)^(-3/2) exp(-|u|^2 / 2).
double gaussian3(const Vec3& u);

// Parzen window estimate over a local region given as offsets from its
// center: density(q) = 1 / (N h) * sum_j G((q - p_j) / h), N = region size.
// The 1/(N h) normalization is kept as is; the learnable transform absorbs
// the missing h^2 factor.
std::vector<double> local_kde(std::span<const Vec3> members, std::span<const Vec3> eval_points,
                              const DensityConfig& cfg);

// local_kde of every region of `regions`, evaluated at each region member,
// concatenated in NeighborList member order.
std::vector<double> region_densities(const NeighborList& regions, const DensityConfig& cfg);

// Unnormalized point density (points per cubic meter) at `query` from every
// point of `points`: sum_j G((q - p_j) / h) / h^3.
double point_density(std::span<const Vec3> points, const Vec3& query, double bandwidth);

// Shared transform T of the inverse-density scale: 1 -> 8 (ReLU) -> 1
// (softplus), floored at kPositivityFloor. Parameters "<prefix>.w0" etc.
inline constexpr std::size_t kDensityHidden = 8;
inline constexpr double kPositivityFloor = 1e-4;

void init_inverse_density(diff::ParamStore& store, const std::string& prefix, Rng& rng);

// Overwrites the transform so that T(d) == value for every d.
void set_inverse_density_constant(diff::ParamStore& store, const std::string& prefix, double value);

// scale_j = 1 / max(T(density_j), kPositivityFloor) for an S x 1 column of
// densities; returns an S x 1 column.
diff::Var inverse_density_scale(diff::Tape& tape, diff::ParamStore& store,
                                const std::string& prefix, diff::Var densities);

}  // namespace dancenet
