#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dancenet/density.hpp"
#include "dancenet/diff/tape.hpp"
#include "dancenet/geom.hpp"

namespace dancenet {
class Rng;

// One downsampling stage: FPS to `points` centers, ball query at `radius`,
// KDE at `bandwidth`, density-aware convolution to `channels` outputs.
struct BlockConfig {
  std::size_t points = 1024;
  double radius = 2.0;
  std::size_t max_neighbors = kDefaultMaxNeighbors;
  double bandwidth = 1.0;
  std::size_t channels = 64;

  void validate() const;
};

// Everything about a down block that does not depend on parameters.
struct DownGeometry {
  std::vector<std::size_t> centers;  // indices into the input level
  std::vector<Vec3> positions;       // positions of the centers
  NeighborList regions;
  std::vector<double> densities;     // KDE at each region member
  double radius = 0.0;
};

DownGeometry plan_down_block(std::span<const Vec3> positions, const BlockConfig& cfg);

// Parameters of one density-aware convolution under `prefix`:
//   <prefix>.kernel  offset MLP 3 -> kernel_hidden -> C_in
//   <prefix>.density inverse-density transform (when use_density)
//   <prefix>.lift    affine C_in -> C_out
// with C_in = feature_channels + 3: the neighbor features are extended by
// the offset to the center, scaled by 1/radius.
struct DConvShape {
  std::size_t feature_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_hidden = 16;
  bool use_density = true;

  std::size_t in_channels() const { return feature_channels + 3; }
};

void init_dconv(diff::ParamStore& store, const std::string& prefix, const DConvShape& shape, Rng& rng);

// out_i = relu(lift(sum_{j in R_i} D_ij * K(o_ij / r) (*) [f_j, o_ij / r]))
// where D_ij is the inverse-density scale of the KDE value at member j
// (1 when use_density is false) and (*) is elementwise.
diff::Var density_aware_conv(diff::Tape& tape, diff::ParamStore& store, const std::string& prefix,
                             const DConvShape& shape, const NeighborList& regions, double radius,
                             std::span<const double> densities, diff::Var features);

struct DownOutput {
  std::vector<Vec3> positions;
  diff::Var features;
};

// plan_down_block followed by density_aware_conv.
DownOutput down_block(diff::Tape& tape, diff::ParamStore& store, const std::string& prefix,
                      const DConvShape& shape, std::span<const Vec3> positions, diff::Var features,
                      const BlockConfig& cfg);

// Inverse-distance weights of the k nearest sparse points of every dense
// point; distances floored at kInterpolationDistanceFloor.
inline constexpr std::size_t kInterpolationNeighbors = 3;
inline constexpr double kInterpolationDistanceFloor = 1e-8;

struct InterpolationPlan {
  NeighborList neighbors;
  std::vector<double> weights;  // parallel to neighbors.indices
};

InterpolationPlan plan_interpolation(std::span<const Vec3> sparse, std::span<const Vec3> dense,
                                     std::size_t k = kInterpolationNeighbors);

// dense x C matrix of weighted sparse features.
diff::Var interpolate(diff::Tape& tape, const InterpolationPlan& plan, diff::Var sparse_features);

// <prefix>.conv: affine (C_sparse + C_skip) -> out_channels, ReLU.
void init_up_block(diff::ParamStore& store, const std::string& prefix, std::size_t sparse_channels,
                   std::size_t skip_channels, std::size_t out_channels, Rng& rng);

diff::Var up_block(diff::Tape& tape, diff::ParamStore& store, const std::string& prefix,
                   const InterpolationPlan& plan, diff::Var sparse_features, diff::Var skip_features);

// Context head over the last two encoder levels:
//   <prefix>.squeeze_a  affine C_a -> C_a / 4, ReLU (on the max-pooled features)
//   <prefix>.squeeze_b  affine C_b -> C_b / 4, ReLU
//   <prefix>.mlp        (C_a + C_b) / 4 -> hidden -> classes, sigmoid
struct ContextShape {
  std::size_t channels_a = 256;
  std::size_t channels_b = 512;
  std::size_t hidden = 64;
  std::size_t classes = 9;
};

void init_context(diff::ParamStore& store, const std::string& prefix, const ContextShape& shape, Rng& rng);

// 1 x classes probabilities.
diff::Var context_encode(diff::Tape& tape, diff::ParamStore& store, const std::string& prefix,
                         const ContextShape& shape, diff::Var features_a, diff::Var features_b);

}  // namespace dancenet
