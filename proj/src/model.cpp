#include "dancenet/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dancenet/data.hpp"
#include "dancenet/diff/ops.hpp"
#include "dancenet/error.hpp"
#include "dancenet/rng.hpp"

namespace dancenet {

using diff::Activation;
using diff::Tape;
using diff::Tensor;
using diff::Var;

DanceNetConfig DanceNetConfig::full() { return DanceNetConfig{}; }

DanceNetConfig DanceNetConfig::desk() {
  DanceNetConfig c;
  c.num_classes = 4;
  c.down_points = {128, 64, 32, 16};
  c.down_channels = {16, 32, 64, 128};
  c.up_channels = {32, 16, 16, 16};
  c.kernel_hidden = 8;
  c.context_hidden = 16;
  return c;
}

void DanceNetConfig::validate() const {
  if (num_classes < 2) fail(ErrorCode::kConfig, "num_classes must be >= 2");
  if (down_points.size() < 2) fail(ErrorCode::kConfig, "need at least two down blocks");
  if (down_channels.size() != down_points.size()) {
    fail(ErrorCode::kConfig, "down_channels must list one width per down block");
  }
  if (up_channels.size() != down_points.size()) {
    fail(ErrorCode::kConfig, "up_channels must list one width per down block");
  }
  for (std::size_t l = 0; l < down_points.size(); ++l) {
    if (down_points[l] == 0) fail(ErrorCode::kConfig, "down_points entries must be > 0");
    if (l > 0 && down_points[l] >= down_points[l - 1]) {
      fail(ErrorCode::kConfig, "down_points must be strictly decreasing");
    }
  }
  for (std::size_t c : down_channels) {
    if (c == 0) fail(ErrorCode::kConfig, "down_channels entries must be > 0");
  }
  for (std::size_t c : up_channels) {
    if (c == 0) fail(ErrorCode::kConfig, "up_channels entries must be > 0");
  }
  if (use_context && (down_channels[levels() - 2] < 4 || down_channels[levels() - 1] < 4)) {
    fail(ErrorCode::kConfig, "context encoder needs >= 4 channels on the last two down blocks");
  }
  if (!(base_radius > 0.0)) fail(ErrorCode::kConfig, "base_radius must be > 0");
  if (!(base_bandwidth > 0.0)) fail(ErrorCode::kConfig, "base_bandwidth must be > 0");
  if (max_neighbors == 0) fail(ErrorCode::kConfig, "max_neighbors must be >= 1");
  if (kernel_hidden == 0 || context_hidden == 0) fail(ErrorCode::kConfig, "hidden widths must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::kConfig, "lambda must be >= 0");
  if (!(alpha > 1.0) || !std::isfinite(alpha)) fail(ErrorCode::kConfig, "alpha must be > 1");
  if (input_features.empty()) fail(ErrorCode::kConfig, "at least one input feature channel is required");
  for (const auto& f : input_features) {
    if (f != kHeightChannel && f != kReflectanceChannel && f != kReturnCountChannel) {
      fail(ErrorCode::kConfig, "unknown input feature '" + f + "'");
    }
  }
}

double DanceNetConfig::radius(std::size_t level) const { return base_radius * std::ldexp(1.0, static_cast<int>(level)); }

double DanceNetConfig::bandwidth(std::size_t level) const {
  return base_bandwidth * std::ldexp(1.0, static_cast<int>(level));
}

BlockConfig DanceNetConfig::block(std::size_t level, std::size_t input_points) const {
  BlockConfig b;
  b.points = std::min(down_points.at(level), input_points);
  b.radius = radius(level);
  b.max_neighbors = max_neighbors;
  b.bandwidth = bandwidth(level);
  b.channels = down_channels.at(level);
  return b;
}

namespace {

std::string down_prefix(std::size_t level) { return "down" + std::to_string(level + 1); }
std::string up_prefix(std::size_t u) { return "up" + std::to_string(u + 1); }

DConvShape down_shape(const DanceNetConfig& cfg, std::size_t level) {
  DConvShape s;
  s.feature_channels = level == 0 ? cfg.input_channels() : cfg.down_channels[level - 1];
  s.out_channels = cfg.down_channels[level];
  s.kernel_hidden = cfg.kernel_hidden;
  s.use_density = cfg.use_density;
  return s;
}

ContextShape context_shape(const DanceNetConfig& cfg) {
  ContextShape s;
  s.channels_a = cfg.down_channels[cfg.levels() - 2];
  s.channels_b = cfg.down_channels[cfg.levels() - 1];
  s.hidden = cfg.context_hidden;
  s.classes = cfg.num_classes;
  return s;
}

// Channels entering up block u from below and from the skip connection.
std::pair<std::size_t, std::size_t> up_inputs(const DanceNetConfig& cfg, std::size_t u) {
  const std::size_t L = cfg.levels();
  const std::size_t sparse = u == 0 ? cfg.down_channels[L - 1] : cfg.up_channels[u - 1];
  const std::size_t skip_level = L - 1 - u;  // 0 = raw input features
  const std::size_t skip = skip_level == 0 ? cfg.input_channels() : cfg.down_channels[skip_level - 1];
  return {sparse, skip};
}

Var bce_terms(Tape& tape, Var probs, const Tensor& targets) {
  Var q = diff::clamp(tape, probs, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var y = tape.constant(targets);
  Tensor inv_targets = targets;
  for (std::size_t k = 0; k < inv_targets.size(); ++k) inv_targets[k] = 1.0 - targets[k];
  Var ny = tape.constant(std::move(inv_targets));
  Var pos = diff::mul(tape, y, diff::log(tape, q));
  Var neg = diff::mul(tape, ny, diff::log(tape, diff::add_scalar(tape, diff::scale(tape, q, -1.0), 1.0)));
  return diff::add(tape, pos, neg);  // elementwise log-likelihood, <= 0
}

void check_probs(const Tensor& p, const char* what) {
  for (double v : p.values()) {
    if (std::isnan(v)) fail(ErrorCode::kNumeric, std::string(what) + ": NaN probability");
  }
}

}  // namespace

ForwardPlan plan_forward(std::span<const Vec3> positions, const DanceNetConfig& cfg) {
  cfg.validate();
  if (positions.empty()) fail(ErrorCode::kEmptyInput, "forward: empty cloud");
  ForwardPlan plan;
  plan.positions.emplace_back(positions.begin(), positions.end());
  for (std::size_t l = 0; l < cfg.levels(); ++l) {
    const auto& in = plan.positions.back();
    plan.down.push_back(plan_down_block(in, cfg.block(l, in.size())));
    plan.positions.push_back(plan.down.back().positions);
  }
  const std::size_t L = cfg.levels();
  for (std::size_t u = 0; u < L; ++u) {
    plan.up.push_back(plan_interpolation(plan.positions[L - u], plan.positions[L - 1 - u]));
  }
  return plan;
}

void init_params(diff::ParamStore& store, const DanceNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  for (std::size_t l = 0; l < cfg.levels(); ++l) init_dconv(store, down_prefix(l), down_shape(cfg, l), rng);
  if (cfg.use_context) init_context(store, "context", context_shape(cfg), rng);
  for (std::size_t u = 0; u < cfg.levels(); ++u) {
    const auto [sparse, skip] = up_inputs(cfg, u);
    init_up_block(store, up_prefix(u), sparse, skip, cfg.up_channels[u], rng);
  }
  const std::array<std::size_t, 2> head{cfg.up_channels.back(), cfg.num_classes};
  diff::mlp_init(store, "head", head, rng);
}

Tensor input_features(const PointCloud& cloud, const DanceNetConfig& cfg) {
  std::vector<std::size_t> channels;
  for (const auto& name : cfg.input_features) {
    auto c = cloud.channel(name);
    if (!c) fail(ErrorCode::kData, "cloud lacks input channel '" + name + "'");
    channels.push_back(*c);
  }
  Tensor t = Tensor::matrix(cloud.size(), channels.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t k = 0; k < channels.size(); ++k) t.at(i, k) = cloud.feature(i, channels[k]);
  }
  return t;
}

ForwardOutput forward(Tape& tape, diff::ParamStore& store, const DanceNetConfig& cfg,
                      const ForwardPlan& plan, const Tensor& features) {
  const std::size_t L = cfg.levels();
  if (plan.down.size() != L || plan.up.size() != L) fail(ErrorCode::kShape, "forward plan depth mismatch");
  if (features.rows() != plan.positions[0].size() || features.cols() != cfg.input_channels()) {
    fail(ErrorCode::kShape, "forward: input features must be N x " + std::to_string(cfg.input_channels()));
  }
  std::vector<Var> level{tape.constant(features)};
  for (std::size_t l = 0; l < L; ++l) {
    const DownGeometry& g = plan.down[l];
    level.push_back(density_aware_conv(tape, store, down_prefix(l), down_shape(cfg, l), g.regions, g.radius,
                                       g.densities, level.back()));
  }
  ForwardOutput out;
  if (cfg.use_context) {
    out.context = context_encode(tape, store, "context", context_shape(cfg), level[L - 1], level[L]);
    out.has_context = true;
  }
  Var cur = level[L];
  for (std::size_t u = 0; u < L; ++u) cur = up_block(tape, store, up_prefix(u), plan.up[u], cur, level[L - 1 - u]);
  const std::array<std::size_t, 2> head{cfg.up_channels.back(), cfg.num_classes};
  out.probabilities = diff::mlp_forward(tape, store, "head", cur, head, Activation::kSigmoid);
  return out;
}

std::vector<double> ground_truth_context(std::span<const int> labels, std::size_t classes) {
  std::vector<double> gt(classes, 0.0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      fail(ErrorCode::kLabel, "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }
    gt[static_cast<std::size_t>(l)] = 1.0;
  }
  return gt;
}

std::vector<double> class_weights(std::span<const std::size_t> counts, double alpha) {
  if (!(alpha > 1.0)) fail(ErrorCode::kConfig, "class_weights: alpha must be > 1");
  double total = 0.0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  if (!(total > 0.0)) fail(ErrorCode::kData, "class_weights: no labeled points");
  std::vector<double> w;
  w.reserve(counts.size());
  for (std::size_t c : counts) w.push_back(1.0 / std::log(alpha + static_cast<double>(c) / total));
  return w;
}

Var loss_classification(Tape& tape, Var probabilities, std::span<const int> labels,
                        std::span<const double> weights) {
  const Tensor& p = tape.value(probabilities);
  check_probs(p, "loss_classification");
  const std::size_t n = p.rows(), k = p.cols();
  if (labels.size() != n) fail(ErrorCode::kShape, "loss_classification: one label per point required");
  if (weights.size() != k) fail(ErrorCode::kShape, "loss_classification: one weight per class required");
  Tensor onehot = Tensor::matrix(n, k);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= k) fail(ErrorCode::kLabel, "loss_classification: label out of range");
    onehot.at(i, static_cast<std::size_t>(l)) = 1.0;
    w[i] = weights[static_cast<std::size_t>(l)];
  }
  Var ll = bce_terms(tape, probabilities, onehot);
  Var weighted = diff::mul_col(tape, ll, tape.constant(Tensor::column(std::move(w))));
  return diff::scale(tape, diff::sum(tape, weighted), -1.0 / static_cast<double>(n));
}

Var loss_context(Tape& tape, Var predicted, std::span<const double> truth) {
  const Tensor& p = tape.value(predicted);
  check_probs(p, "loss_context");
  if (p.size() != truth.size()) fail(ErrorCode::kShape, "loss_context: prediction and truth differ in length");
  Var ll = bce_terms(tape, predicted, Tensor::matrix(p.rows(), p.cols(), {truth.begin(), truth.end()}));
  return diff::scale(tape, diff::sum(tape, ll), -1.0 / static_cast<double>(truth.size()));
}

Var loss_total(Tape& tape, Var l_cls, Var l_ctx, double lambda) {
  return diff::add(tape, l_cls, diff::scale(tape, l_ctx, lambda));
}

std::vector<int> predict_labels(const Tensor& probabilities) {
  const std::size_t n = probabilities.rows(), k = probabilities.cols();
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (probabilities.at(i, c) > probabilities.at(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

BlockLoss block_loss(Tape& tape, diff::ParamStore& store, const DanceNetConfig& cfg, const ForwardPlan& plan,
                     const Tensor& features, std::span<const int> labels, std::span<const double> weights) {
  ForwardOutput fw = forward(tape, store, cfg, plan, features);
  BlockLoss out;
  out.probabilities = fw.probabilities;
  out.l_cls = loss_classification(tape, fw.probabilities, labels, weights);
  if (fw.has_context) {
    out.l_ctx = loss_context(tape, fw.context, ground_truth_context(labels, cfg.num_classes));
    out.total = loss_total(tape, out.l_cls, out.l_ctx, cfg.lambda);
    out.has_context = true;
  } else {
    out.l_ctx = tape.constant(Tensor::matrix(1, 1, 0.0));
    out.total = out.l_cls;
  }
  return out;
}

LossBreakdown evaluate_loss(diff::ParamStore& store, const DanceNetConfig& cfg, const PointCloud& cloud,
                            std::span<const double> weights) {
  if (!cloud.labels) fail(ErrorCode::kData, "evaluate_loss: cloud has no labels");
  Tape tape(diff::TapeMode::kInference);
  const ForwardPlan plan = plan_forward(cloud.positions, cfg);
  BlockLoss bl = block_loss(tape, store, cfg, plan, input_features(cloud, cfg), *cloud.labels, weights);
  LossBreakdown lb;
  lb.l_cls = tape.value(bl.l_cls).item();
  lb.l_ctx = tape.value(bl.l_ctx).item();
  lb.total = tape.value(bl.total).item();
  lb.class_weights.assign(weights.begin(), weights.end());
  for (int l : *cloud.labels) lb.point_weights.push_back(weights[static_cast<std::size_t>(l)]);
  return lb;
}

Tensor predict_probabilities(diff::ParamStore& store, const DanceNetConfig& cfg, const PointCloud& cloud) {
  Tape tape(diff::TapeMode::kInference);
  const ForwardPlan plan = plan_forward(cloud.positions, cfg);
  ForwardOutput fw = forward(tape, store, cfg, plan, input_features(cloud, cfg));
  return tape.value(fw.probabilities);
}

double learning_rate_at(std::size_t step, const TrainOptions& opt) {
  if (opt.lr_decay_steps == 0) return opt.learning_rate;
  return opt.learning_rate * std::pow(opt.lr_decay, static_cast<double>(step / opt.lr_decay_steps));
}

TrainResult train(diff::ParamStore& store, const DanceNetConfig& cfg, std::span<const PointCloud> blocks,
                  const TrainOptions& opt, const std::function<void(const StepLog&)>& on_step) {
  cfg.validate();
  if (blocks.empty()) fail(ErrorCode::kData, "train: empty dataset");
  if (opt.batch_size == 0) fail(ErrorCode::kConfig, "train: batch_size must be > 0");
  std::vector<std::size_t> counts(cfg.num_classes, 0);
  for (const PointCloud& b : blocks) {
    if (!b.labels) fail(ErrorCode::kData, "train: every block needs labels");
    auto c = class_counts(*b.labels, cfg.num_classes);
    for (std::size_t k = 0; k < c.size(); ++k) counts[k] += c[k];
  }
  TrainResult result;
  result.class_weights = class_weights(counts, cfg.alpha);

  Rng order_rng = Rng::split(opt.seed, 0);
  const std::size_t nb = blocks.size();
  const std::size_t steps_per_epoch = (nb + opt.batch_size - 1) / opt.batch_size;
  std::vector<std::size_t> order(nb);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = 0; i < nb; ++i) order[i] = i;
    for (std::size_t i = nb; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    EpochLog elog;
    elog.epoch = epoch;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      Tape tape;
      std::vector<Var> totals, cls, ctx;
      std::size_t correct = 0, seen = 0;
      std::vector<std::vector<int>> batch_labels;
      std::vector<Var> batch_probs;
      for (std::size_t b = 0; b < opt.batch_size; ++b) {
        const PointCloud& block = blocks[order[(s * opt.batch_size + b) % nb]];
        Rng sample_rng = Rng::split(opt.seed, 1 + step * opt.batch_size + b);
        SampledBlock sb = sample_training_block(block, opt.sample_points, opt.dropout, sample_rng);
        const ForwardPlan plan = plan_forward(sb.cloud.positions, cfg);
        BlockLoss bl = block_loss(tape, store, cfg, plan, input_features(sb.cloud, cfg), *sb.cloud.labels,
                                  result.class_weights);
        totals.push_back(bl.total);
        cls.push_back(bl.l_cls);
        ctx.push_back(bl.l_ctx);
        batch_probs.push_back(bl.probabilities);
        batch_labels.push_back(std::move(*sb.cloud.labels));
      }
      Var loss = totals[0];
      for (std::size_t b = 1; b < totals.size(); ++b) loss = diff::add(tape, loss, totals[b]);
      loss = diff::scale(tape, loss, 1.0 / static_cast<double>(totals.size()));

      StepLog log;
      log.step = step;
      log.epoch = epoch;
      log.learning_rate = learning_rate_at(step, opt);
      const double inv_b = 1.0 / static_cast<double>(totals.size());
      for (std::size_t b = 0; b < totals.size(); ++b) {
        log.l_cls += tape.value(cls[b]).item() * inv_b;
        log.l_ctx += tape.value(ctx[b]).item() * inv_b;
        const auto pred = predict_labels(tape.value(batch_probs[b]));
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch_labels[b][i];
        seen += pred.size();
      }
      log.total = tape.value(loss).item();
      log.batch_accuracy = static_cast<double>(correct) / static_cast<double>(seen);

      tape.backward(loss);
      diff::adam_step(store, log.learning_rate);

      elog.mean.l_cls += log.l_cls;
      elog.mean.l_ctx += log.l_ctx;
      elog.mean.total += log.total;
      elog.batch_accuracy += log.batch_accuracy;
      result.steps.push_back(log);
      if (on_step) on_step(log);
    }
    const double inv_s = 1.0 / static_cast<double>(steps_per_epoch);
    elog.mean.l_cls *= inv_s;
    elog.mean.l_ctx *= inv_s;
    elog.mean.total *= inv_s;
    elog.batch_accuracy *= inv_s;
    elog.mean.class_weights = result.class_weights;
    result.epochs.push_back(std::move(elog));
  }
  return result;
}

}  // namespace dancenet
