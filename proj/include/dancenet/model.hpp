#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dancenet/diff/param_store.hpp"
#include "dancenet/diff/tape.hpp"
#include "dancenet/geom.hpp"
#include "dancenet/layers.hpp"

namespace dancenet {

struct DanceNetConfig {
  std::size_t num_classes = 9;
  std::vector<std::size_t> down_points{1024, 256, 64, 36};
  std::vector<std::size_t> down_channels{64, 128, 256, 512};
  std::vector<std::size_t> up_channels{256, 128, 64, 64};
  double base_radius = 2.0;     // doubled after every down block
  double base_bandwidth = 1.0;  // same schedule
  std::size_t max_neighbors = kDefaultMaxNeighbors;
  std::size_t kernel_hidden = 16;
  std::size_t context_hidden = 64;
  double lambda = 1.0;
  double alpha = 1.2;
  // Per-point input channels, by name: "hag", "reflectance", "return_count".
  std::vector<std::string> input_features{"hag"};
  bool use_density = true;
  bool use_context = true;

  static DanceNetConfig full();
  // Same topology at sizes a desktop trains in minutes.
  static DanceNetConfig desk();

  void validate() const;
  std::size_t levels() const { return down_points.size(); }
  std::size_t input_channels() const { return input_features.size(); }
  double radius(std::size_t level) const;     // level 0 = first down block
  double bandwidth(std::size_t level) const;
  // Down block `level` for an input of n points; the point count is
  // min(configured, n) so small inference blocks pass through.
  BlockConfig block(std::size_t level, std::size_t input_points) const;
};

// Parameter-independent geometry of one forward pass.
struct ForwardPlan {
  std::vector<std::vector<Vec3>> positions;  // level 0 = input points
  std::vector<DownGeometry> down;
  std::vector<InterpolationPlan> up;         // up[0] goes from the deepest level
};

ForwardPlan plan_forward(std::span<const Vec3> positions, const DanceNetConfig& cfg);

// Glorot initialization of every parameter under a fixed seed.
void init_params(diff::ParamStore& store, const DanceNetConfig& cfg, std::uint64_t seed);

// N x F input matrix assembled from the cloud's named channels.
diff::Tensor input_features(const PointCloud& cloud, const DanceNetConfig& cfg);

struct ForwardOutput {
  diff::Var probabilities;  // N x K per-class sigmoid probabilities
  diff::Var context;        // 1 x K, only when cfg.use_context
  bool has_context = false;
};

ForwardOutput forward(diff::Tape& tape, diff::ParamStore& store, const DanceNetConfig& cfg,
                      const ForwardPlan& plan, const diff::Tensor& features);

// Context presence vector: entry i is 1 iff some label equals i.
std::vector<double> ground_truth_context(std::span<const int> labels, std::size_t classes);

// W_i = 1 / ln(alpha + N_i / sum N).
std::vector<double> class_weights(std::span<const std::size_t> counts, double alpha);

inline constexpr double kProbabilityClamp = 1e-12;

// Mean over points of w_j * sum_c BCE(p_jc, y_jc), with w_j = W[label_j].
diff::Var loss_classification(diff::Tape& tape, diff::Var probabilities, std::span<const int> labels,
                              std::span<const double> weights);

// Mean over classes of BCE(pred_i, gt_i).
diff::Var loss_context(diff::Tape& tape, diff::Var predicted, std::span<const double> truth);

diff::Var loss_total(diff::Tape& tape, diff::Var l_cls, diff::Var l_ctx, double lambda);

// Argmax per row, ties to the lowest class.
std::vector<int> predict_labels(const diff::Tensor& probabilities);

struct LossBreakdown {
  double l_cls = 0.0;
  double l_ctx = 0.0;
  double total = 0.0;
  std::vector<double> class_weights;
  std::vector<double> point_weights;
};

// Forward and loss of one labeled cloud on the given tape.
struct BlockLoss {
  diff::Var total;
  diff::Var l_cls;
  diff::Var l_ctx;
  bool has_context = false;
  diff::Var probabilities;
};

BlockLoss block_loss(diff::Tape& tape, diff::ParamStore& store, const DanceNetConfig& cfg,
                     const ForwardPlan& plan, const diff::Tensor& features, std::span<const int> labels,
                     std::span<const double> weights);

LossBreakdown evaluate_loss(diff::ParamStore& store, const DanceNetConfig& cfg, const PointCloud& cloud,
                            std::span<const double> weights);

// Inference on one cloud that already carries the input channels.
diff::Tensor predict_probabilities(diff::ParamStore& store, const DanceNetConfig& cfg, const PointCloud& cloud);

struct TrainOptions {
  std::size_t epochs = 1000;
  std::size_t batch_size = 6;
  double learning_rate = 0.01;
  std::size_t lr_decay_steps = 3000;
  double lr_decay = 0.5;
  std::size_t sample_points = 8192;
  double dropout = 0.125;
  std::uint64_t seed = 0;
};

// lr * decay^floor(step / decay_steps)
double learning_rate_at(std::size_t step, const TrainOptions& opt);

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double l_cls = 0.0;
  double l_ctx = 0.0;
  double total = 0.0;
  double batch_accuracy = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown mean;  // step means over the epoch
  double batch_accuracy = 0.0;
};

struct TrainResult {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::vector<double> class_weights;
};

// Mini-batch Adam over sampled blocks. Each epoch visits the blocks in a
// shuffled order in batches of batch_size (the last batch wraps around).
// Class weights come from the labels of all blocks, once. Blocks must carry
// labels and the configured input channels. on_step, when set, runs after
// every optimizer step.
TrainResult train(diff::ParamStore& store, const DanceNetConfig& cfg, std::span<const PointCloud> blocks,
                  const TrainOptions& opt, const std::function<void(const StepLog&)>& on_step = {});

}  // namespace dancenet
