#include <bit>
#include <cmath>
#include <functional>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"

#include "dancenet/data.hpp"
#include "dancenet/diff/ops.hpp"
#include "dancenet/model.hpp"

using dancenet::DanceNetConfig;
using dancenet::ErrorCode;
using dancenet::Rng;
using dancenet::Vec3;
namespace diff = dancenet::diff;
using diff::Tape;
using diff::Tensor;

namespace {

dancenet::PointCloud labeled_cloud(std::uint64_t seed, std::size_t n, std::size_t k) {
  Rng rng(seed);
  dancenet::PointCloud c;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    c.positions.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 4)});
    labels.push_back(static_cast<int>(rng.below(k)));
  }
  c.labels = labels;
  c.add_channel(dancenet::kHeightChannel, dancenet::height_above_ground(c, 5.0));
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("class weights") {
  const std::vector<std::size_t> absent{0, 10};
  CHECK(dancenet::class_weights(absent, 1.2)[0] == doctest::Approx(5.4848).epsilon(1e-4));
  CHECK(std::abs(dancenet::class_weights(absent, 1.2)[1] - 1.0 / std::log(2.2)) < 1e-12);
  CHECK(dancenet::class_weights(absent, 1.2)[1] == doctest::Approx(1.2683).epsilon(1e-4));
  const std::vector<std::size_t> power{546, 753876 - 546};
  CHECK(std::abs(dancenet::class_weights(power, 1.2)[0] - 5.4668) < 1e-3);

  std::vector<std::size_t> ramp;
  for (std::size_t i = 0; i < 20; ++i) ramp.push_back(i * i);
  const auto w = dancenet::class_weights(ramp, 1.2);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] < w[i - 1]);
  for (double v : w) CHECK(v > 0.0);

  CHECK_ERROR_CODE(dancenet::class_weights(absent, 1.0), ErrorCode::kConfig);
  const std::vector<std::size_t> none{0, 0};
  CHECK_ERROR_CODE(dancenet::class_weights(none, 1.2), ErrorCode::kData);
}

TEST_CASE("ground truth context examples") {
  const std::vector<int> a{0, 0, 2};
  CHECK(dancenet::ground_truth_context(a, 4) == std::vector<double>{1, 0, 1, 0});
  const std::vector<int> all{3, 1, 0, 2};
  CHECK(dancenet::ground_truth_context(all, 4) == std::vector<double>{1, 1, 1, 1});
  const std::vector<int> one(50, 1);
  CHECK(dancenet::ground_truth_context(one, 3) == std::vector<double>{0, 1, 0});
  const std::vector<int> bad{0, 4};
  CHECK_ERROR_CODE(dancenet::ground_truth_context(bad, 4), ErrorCode::kLabel);
}

TEST_CASE("ground truth context over every multiset") {
  // Every nondecreasing label sequence of length 1..K over K classes.
  for (std::size_t k = 1; k <= 8; ++k) {
    for (std::size_t len = 1; len <= k; ++len) {
      std::vector<int> seq(len, 0);
      while (true) {
        std::vector<double> want(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
          for (int l : seq) {
            if (l == static_cast<int>(c)) want[c] = 1.0;
          }
        }
        REQUIRE(dancenet::ground_truth_context(seq, k) == want);
        std::size_t pos = len;
        while (pos > 0 && seq[pos - 1] == static_cast<int>(k) - 1) --pos;
        if (pos == 0) break;
        ++seq[pos - 1];
        for (std::size_t j = pos; j < len; ++j) seq[j] = seq[pos - 1];
      }
    }
  }
}

TEST_CASE("classification loss") {
  Tape t;
  const std::size_t k = 5;
  const std::vector<int> labels{0, 3, 4};
  const std::vector<double> unit(k, 1.0);
  auto half = t.constant(Tensor::matrix(3, k, 0.5));
  CHECK(std::abs(t.value(dancenet::loss_classification(t, half, labels, unit)).item() - k * std::numbers::ln2) < 1e-12);

  Tensor onehot = Tensor::matrix(3, k, 0.0);
  for (std::size_t i = 0; i < 3; ++i) onehot.at(i, labels[i]) = 1.0;
  CHECK(t.value(dancenet::loss_classification(t, t.constant(onehot), labels, unit)).item() < 1e-10);

  Rng rng(2);
  Tensor p = Tensor::matrix(3, k);
  for (double& v : p.values()) v = rng.uniform(0.05, 0.95);
  std::vector<double> w{1.0, 2.0, 0.5, 3.0, 1.5}, w2;
  for (double v : w) w2.push_back(2.0 * v);
  const double l1 = t.value(dancenet::loss_classification(t, t.constant(p), labels, w)).item();
  const double l2 = t.value(dancenet::loss_classification(t, t.constant(p), labels, w2)).item();
  CHECK(l2 == 2.0 * l1);

  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double y = static_cast<int>(c) == labels[i] ? 1.0 : 0.0;
      s += y * std::log(p.at(i, c)) + (1 - y) * std::log(1 - p.at(i, c));
    }
    want -= w[labels[i]] * s;
  }
  CHECK(std::abs(l1 - want / 3.0) < 1e-12);

  Tensor nan = p;
  nan[2] = std::nan("");
  CHECK_ERROR_CODE(dancenet::loss_classification(t, t.constant(nan), labels, w), ErrorCode::kNumeric);
  const std::vector<int> bad{0, 5, 1};
  CHECK_ERROR_CODE(dancenet::loss_classification(t, t.constant(p), bad, w), ErrorCode::kLabel);
}

TEST_CASE("context loss") {
  const std::size_t k = 4;
  const std::vector<double> gt{1, 0, 1, 1};
  {
    Tape t;
    auto v = t.constant(Tensor::matrix(1, k, std::vector<double>(gt)));
    CHECK(t.value(dancenet::loss_context(t, v, gt)).item() < 1e-10);
    auto h = t.constant(Tensor::matrix(1, k, 0.5));
    CHECK(std::abs(t.value(dancenet::loss_context(t, h, gt)).item() - std::numbers::ln2) < 1e-12);
  }
  diff::ParamStore store;
  store.add("p", Tensor::matrix(1, k, 0.5));
  Tape t;
  const std::vector<double> ones(k, 1.0);
  t.backward(dancenet::loss_context(t, t.parameter(store, "p"), ones));
  for (double g : store.grad(0).values()) CHECK(std::abs(g + 2.0 / k) < 1e-12);
}

TEST_CASE("total loss") {
  Tape t;
  auto a = t.constant(Tensor::scalar(0.3));
  auto b = t.constant(Tensor::scalar(0.2));
  CHECK(std::abs(t.value(dancenet::loss_total(t, a, b, 1.0)).item() - 0.5) < 1e-15);
  CHECK(t.value(dancenet::loss_total(t, a, b, 0.0)).item() == 0.3);
  CHECK(std::abs(t.value(dancenet::loss_total(t, a, b, 0.8)).item() - 0.46) < 1e-15);
}

TEST_CASE("learning rate schedule") {
  dancenet::TrainOptions opt;
  CHECK(dancenet::learning_rate_at(0, opt) == 0.01);
  CHECK(dancenet::learning_rate_at(2999, opt) == 0.01);
  CHECK(dancenet::learning_rate_at(3000, opt) == 0.005);
  CHECK(dancenet::learning_rate_at(9000, opt) == 0.00125);
}

TEST_CASE("predict labels") {
  Tensor p = Tensor::matrix(3, 3, std::vector<double>{0, 1, 0, 0.2, 0.2, 0.2, 0.1, 0.3, 0.7});
  CHECK(dancenet::predict_labels(p) == std::vector<int>{1, 0, 2});
  for (double& v : p.values()) v *= 3.5;
  CHECK(dancenet::predict_labels(p) == std::vector<int>{1, 0, 2});
}

TEST_CASE("config validation") {
  DanceNetConfig::full().validate();
  DanceNetConfig::desk().validate();
  CHECK(DanceNetConfig::full().radius(3) == 16.0);
  CHECK(DanceNetConfig::full().bandwidth(2) == 4.0);
  CHECK(DanceNetConfig::desk().block(0, 40).points == 40);
  auto bad = [](auto&& edit) {
    DanceNetConfig c = DanceNetConfig::desk();
    edit(c);
    CHECK_ERROR_CODE(c.validate(), ErrorCode::kConfig);
  };
  bad([](DanceNetConfig& c) { c.down_points = {64, 64, 32, 16}; });
  bad([](DanceNetConfig& c) { c.alpha = 1.0; });
  bad([](DanceNetConfig& c) { c.lambda = -0.1; });
  bad([](DanceNetConfig& c) { c.base_radius = 0.0; });
  bad([](DanceNetConfig& c) { c.down_channels = {16, 32, 64}; });
  bad([](DanceNetConfig& c) { c.input_features = {"rgb"}; });
  bad([](DanceNetConfig& c) { c.num_classes = 1; });
}

TEST_CASE("forward") {
  DanceNetConfig cfg = DanceNetConfig::desk();
  cfg.num_classes = 4;
  const auto cloud = labeled_cloud(6, 300, 4);
  diff::ParamStore store;
  dancenet::init_params(store, cfg, 1);
  const auto plan = dancenet::plan_forward(cloud.positions, cfg);
  const Tensor x = dancenet::input_features(cloud, cfg);
  Tape t1(diff::TapeMode::kInference), t2(diff::TapeMode::kInference);
  const auto o1 = dancenet::forward(t1, store, cfg, plan, x);
  const auto o2 = dancenet::forward(t2, store, cfg, plan, x);
  const Tensor& p = t1.value(o1.probabilities);
  CHECK(p.rows() == 300);
  CHECK(p.cols() == 4);
  REQUIRE(o1.has_context);
  CHECK(t1.value(o1.context).cols() == 4);
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(p[k] > 0.0);
    CHECK(p[k] < 1.0);
    CHECK(std::bit_cast<std::uint64_t>(p[k]) == std::bit_cast<std::uint64_t>(t2.value(o2.probabilities)[k]));
  }

  SUBCASE("inputs smaller than the first block") {
    const auto small = labeled_cloud(7, 50, 4);
    const Tensor probs = dancenet::predict_probabilities(store, cfg, small);
    CHECK(probs.rows() == 50);
  }
  SUBCASE("context off") {
    DanceNetConfig nc = cfg;
    nc.use_context = false;
    nc.use_density = false;
    diff::ParamStore s2;
    dancenet::init_params(s2, nc, 1);
    CHECK_FALSE(s2.contains("context.mlp.w0"));
    CHECK_FALSE(s2.contains("down1.density.w0"));
    const auto w = dancenet::class_weights(dancenet::class_counts(*cloud.labels, 4), nc.alpha);
    const auto br = dancenet::evaluate_loss(s2, nc, cloud, w);
    CHECK(br.l_ctx == 0.0);
    CHECK(br.total == br.l_cls);
  }
  SUBCASE("loss breakdown adds up") {
    cfg.lambda = 0.7;
    const auto w = dancenet::class_weights(dancenet::class_counts(*cloud.labels, 4), cfg.alpha);
    const auto br = dancenet::evaluate_loss(store, cfg, cloud, w);
    CHECK(br.l_cls > 0.0);
    CHECK(br.l_ctx > 0.0);
    CHECK(std::abs(br.total - (br.l_cls + 0.7 * br.l_ctx)) < 1e-12);
  }
  SUBCASE("missing channel") {
    DanceNetConfig rc = cfg;
    rc.input_features = {"reflectance"};
    CHECK_ERROR_CODE(dancenet::input_features(cloud, rc), ErrorCode::kData);
  }
}

TEST_CASE("training is deterministic") {
  DanceNetConfig cfg = DanceNetConfig::desk();
  cfg.num_classes = 3;
  const std::vector<dancenet::PointCloud> blocks{labeled_cloud(1, 200, 3), labeled_cloud(2, 180, 3),
                                                 labeled_cloud(3, 150, 3)};
  dancenet::TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 2;
  opt.sample_points = 160;
  auto run = [&] {
    diff::ParamStore store;
    dancenet::init_params(store, cfg, 9);
    return std::make_pair(dancenet::train(store, cfg, blocks, opt), store.value(0));
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.steps.size() == 4);
  REQUIRE(b.first.steps.size() == 4);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(a.first.steps[s].total == b.first.steps[s].total);
    CHECK(std::isfinite(a.first.steps[s].total));
  }
  for (std::size_t k = 0; k < a.second.size(); ++k) CHECK(a.second[k] == b.second[k]);

  std::vector<dancenet::PointCloud> none;
  diff::ParamStore store;
  dancenet::init_params(store, cfg, 9);
  CHECK_ERROR_CODE(dancenet::train(store, cfg, none, opt), ErrorCode::kData);
}

}  // TEST_SUITE
