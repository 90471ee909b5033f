#include "dancenet/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dancenet/diff/ops.hpp"
#include "dancenet/error.hpp"
#include "dancenet/rng.hpp"

namespace dancenet {

using diff::Activation;
using diff::Tape;
using diff::Tensor;
using diff::Var;

void BlockConfig::validate() const {
  if (points == 0) fail(ErrorCode::kConfig, "block point count must be > 0");
  if (!(radius > 0.0) || !std::isfinite(radius)) fail(ErrorCode::kConfig, "block radius must be > 0");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    fail(ErrorCode::kConfig, "block KDE bandwidth must be > 0");
  }
  if (max_neighbors == 0) fail(ErrorCode::kConfig, "block max_neighbors must be >= 1");
  if (channels == 0) fail(ErrorCode::kConfig, "block channel width must be > 0");
}

DownGeometry plan_down_block(std::span<const Vec3> positions, const BlockConfig& cfg) {
  cfg.validate();
  if (positions.size() < cfg.points) {
    fail(ErrorCode::kSize, "down block needs " + std::to_string(cfg.points) + " input points, got " +
                               std::to_string(positions.size()));
  }
  DownGeometry g;
  g.radius = cfg.radius;
  g.centers = farthest_point_sample(positions, cfg.points, 0);
  g.positions.reserve(g.centers.size());
  for (std::size_t c : g.centers) g.positions.push_back(positions[c]);
  g.regions = ball_query(positions, g.centers, cfg.radius, cfg.max_neighbors);
  g.densities = region_densities(g.regions, DensityConfig{cfg.bandwidth});
  return g;
}

void init_dconv(diff::ParamStore& store, const std::string& prefix, const DConvShape& shape, Rng& rng) {
  const std::array<std::size_t, 3> kernel{3, shape.kernel_hidden, shape.in_channels()};
  diff::mlp_init(store, prefix + ".kernel", kernel, rng);
  if (shape.use_density) init_inverse_density(store, prefix + ".density", rng);
  const std::array<std::size_t, 2> lift{shape.in_channels(), shape.out_channels};
  diff::mlp_init(store, prefix + ".lift", lift, rng);
}

Var density_aware_conv(Tape& tape, diff::ParamStore& store, const std::string& prefix,
                       const DConvShape& shape, const NeighborList& regions, double radius,
                       std::span<const double> densities, Var features) {
  const Tensor& f = tape.value(features);
  if (f.cols() != shape.feature_channels) {
    fail(ErrorCode::kShape, prefix + ": expected " + std::to_string(shape.feature_channels) +
                                " feature channels, got " + std::to_string(f.cols()));
  }
  if (densities.size() != regions.total()) {
    fail(ErrorCode::kShape, prefix + ": one density per region member required");
  }
  for (std::size_t idx : regions.indices) {
    if (idx >= f.rows()) fail(ErrorCode::kIndex, prefix + ": neighbor index outside the feature set");
  }
  const std::size_t s = regions.total();
  const double inv_r = 1.0 / radius;
  Tensor offs = Tensor::matrix(s, 3);
  for (std::size_t k = 0; k < s; ++k) {
    const Vec3& o = regions.offsets[k];
    offs[3 * k] = o.x * inv_r;
    offs[3 * k + 1] = o.y * inv_r;
    offs[3 * k + 2] = o.z * inv_r;
  }
  Var offsets = tape.constant(std::move(offs));

  const std::array<std::size_t, 3> kernel{3, shape.kernel_hidden, shape.in_channels()};
  Var weights = diff::mlp_forward(tape, store, prefix + ".kernel", offsets, kernel);
  Var neighbor = diff::concat_cols(tape, diff::gather_rows(tape, features, regions.indices), offsets);
  Var terms = diff::mul(tape, weights, neighbor);
  if (shape.use_density) {
    Var dens = tape.constant(Tensor::column({densities.begin(), densities.end()}));
    Var inv = inverse_density_scale(tape, store, prefix + ".density", dens);
    terms = diff::mul_col(tape, terms, inv);
  }
  Var pooled = diff::segment_sum(tape, terms, regions.row_begin);
  const std::array<std::size_t, 2> lift{shape.in_channels(), shape.out_channels};
  return diff::mlp_forward(tape, store, prefix + ".lift", pooled, lift, Activation::kRelu);
}

DownOutput down_block(Tape& tape, diff::ParamStore& store, const std::string& prefix,
                      const DConvShape& shape, std::span<const Vec3> positions, Var features,
                      const BlockConfig& cfg) {
  if (shape.out_channels != cfg.channels) {
    fail(ErrorCode::kShape, prefix + ": block channels differ from convolution output width");
  }
  DownGeometry g = plan_down_block(positions, cfg);
  Var out = density_aware_conv(tape, store, prefix, shape, g.regions, g.radius, g.densities, features);
  return {std::move(g.positions), out};
}

InterpolationPlan plan_interpolation(std::span<const Vec3> sparse, std::span<const Vec3> dense,
                                     std::size_t k) {
  if (sparse.empty()) fail(ErrorCode::kEmptyInput, "interpolation: empty sparse set");
  InterpolationPlan plan;
  plan.neighbors = knn(sparse, dense, k);
  plan.weights.resize(plan.neighbors.total());
  for (std::size_t q = 0; q < plan.neighbors.centers(); ++q) {
    double total = 0.0;
    for (std::size_t m = plan.neighbors.begin(q); m < plan.neighbors.end(q); ++m) {
      const double d = std::max(plan.neighbors.offsets[m].norm(), kInterpolationDistanceFloor);
      plan.weights[m] = 1.0 / d;
      total += plan.weights[m];
    }
    for (std::size_t m = plan.neighbors.begin(q); m < plan.neighbors.end(q); ++m) {
      plan.weights[m] /= total;
    }
  }
  return plan;
}

Var interpolate(Tape& tape, const InterpolationPlan& plan, Var sparse_features) {
  Var gathered = diff::gather_rows(tape, sparse_features, plan.neighbors.indices);
  Var w = tape.constant(Tensor::column(plan.weights));
  return diff::segment_sum(tape, diff::mul_col(tape, gathered, w), plan.neighbors.row_begin);
}

void init_up_block(diff::ParamStore& store, const std::string& prefix, std::size_t sparse_channels,
                   std::size_t skip_channels, std::size_t out_channels, Rng& rng) {
  const std::array<std::size_t, 2> widths{sparse_channels + skip_channels, out_channels};
  diff::mlp_init(store, prefix + ".conv", widths, rng);
}

Var up_block(Tape& tape, diff::ParamStore& store, const std::string& prefix,
             const InterpolationPlan& plan, Var sparse_features, Var skip_features) {
  if (tape.value(skip_features).rows() != plan.neighbors.centers()) {
    fail(ErrorCode::kShape, prefix + ": skip features do not match the dense point count");
  }
  Var interp = interpolate(tape, plan, sparse_features);
  Var joined = diff::concat_cols(tape, interp, skip_features);
  const std::size_t out = store.value(prefix + ".conv.w0").cols();
  const std::array<std::size_t, 2> widths{tape.value(joined).cols(), out};
  return diff::mlp_forward(tape, store, prefix + ".conv", joined, widths, Activation::kRelu);
}

void init_context(diff::ParamStore& store, const std::string& prefix, const ContextShape& shape,
                  Rng& rng) {
  const std::size_t qa = shape.channels_a / 4, qb = shape.channels_b / 4;
  if (qa == 0 || qb == 0) fail(ErrorCode::kConfig, "context encoder needs at least 4 channels per level");
  const std::array<std::size_t, 2> sa{shape.channels_a, qa};
  const std::array<std::size_t, 2> sb{shape.channels_b, qb};
  const std::array<std::size_t, 3> mlp{qa + qb, shape.hidden, shape.classes};
  diff::mlp_init(store, prefix + ".squeeze_a", sa, rng);
  diff::mlp_init(store, prefix + ".squeeze_b", sb, rng);
  diff::mlp_init(store, prefix + ".mlp", mlp, rng);
}

Var context_encode(Tape& tape, diff::ParamStore& store, const std::string& prefix,
                   const ContextShape& shape, Var features_a, Var features_b) {
  const std::size_t qa = shape.channels_a / 4, qb = shape.channels_b / 4;
  const std::array<std::size_t, 2> sa{shape.channels_a, qa};
  const std::array<std::size_t, 2> sb{shape.channels_b, qb};
  const std::array<std::size_t, 3> mlp{qa + qb, shape.hidden, shape.classes};
  Var a = diff::mlp_forward(tape, store, prefix + ".squeeze_a", diff::max_rows(tape, features_a), sa,
                            Activation::kRelu);
  Var b = diff::mlp_forward(tape, store, prefix + ".squeeze_b", diff::max_rows(tape, features_b), sb,
                            Activation::kRelu);
  return diff::mlp_forward(tape, store, prefix + ".mlp", diff::concat_cols(tape, a, b), mlp,
                           Activation::kSigmoid);
}

}  // namespace dancenet
