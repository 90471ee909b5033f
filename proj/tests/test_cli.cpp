#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "dancenet/cli.hpp"

using dancenet::ErrorCode;
using dancenet::cli::RunConfig;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("dancenet_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("defaults follow the preset") {
  RunConfig run;
  CHECK(run.preset() == "desk");
  CHECK(run.get("epochs") == "200");
  CHECK(run.model().down_points == std::vector<std::size_t>{128, 64, 32, 16});
  run.set("preset", "full");
  CHECK(run.get("epochs") == "1000");
  CHECK(run.model().down_points == std::vector<std::size_t>{1024, 256, 64, 36});
  CHECK(run.train_options().sample_points == 8192);
  CHECK_ERROR_CODE(run.set("preset", "huge"), ErrorCode::kConfig);
}

TEST_CASE("unknown and malformed keys") {
  RunConfig run;
  CHECK_ERROR_CODE(run.set("epoch", "3"), ErrorCode::kConfig);
  CHECK_ERROR_CODE(run.get("nope"), ErrorCode::kConfig);
  run.set("epochs", "many");
  CHECK_ERROR_CODE(run.train_options(), ErrorCode::kConfig);
  run.set("epochs", "5");
  run.set("use_density", "maybe");
  CHECK_ERROR_CODE(run.model(), ErrorCode::kConfig);
  std::istringstream bad("epochs 5\n");
  CHECK_ERROR_CODE(run.load_text(bad), ErrorCode::kConfig);
  CHECK_ERROR_CODE(run.require("train_file"), ErrorCode::kConfig);
  CHECK_ERROR_CODE(run.load_file("/nonexistent/run.cfg"), ErrorCode::kIo);
}

TEST_CASE("dump reloads to the same configuration") {
  RunConfig run;
  std::istringstream text("# comment\n\nseed = 7\nlambda=0.8\ndown_channels=8,16,32,64\nclass_names=a, b ,c,d\n");
  run.load_text(text);
  CHECK(run.seed() == 7);
  CHECK(run.model().lambda == 0.8);
  CHECK(run.class_names() == std::vector<std::string>{"a", "b", "c", "d"});
  RunConfig again;
  std::istringstream dumped(run.dump());
  again.load_text(dumped);
  CHECK(again.dump() == run.dump());
  CHECK(again.model().down_channels == run.model().down_channels);
}

TEST_CASE("synthetic class names and seeds") {
  RunConfig run;
  run.set("synth_preset", "desk");
  CHECK(run.class_names().size() == 4);
  run.set("seed", "3");
  CHECK(run.synth_seed() == 3);
  run.set("synth_seed", "11");
  CHECK(run.synth_seed() == 11);
}

TEST_CASE("model checkpoint round trip") {
  const fs::path dir = scratch("ckpt");
  RunConfig run;
  run.set("num_classes", "4");
  auto model = dancenet::cli::create_model(run.model(), 5);
  const std::string path = (dir / "m.ckpt").string();
  dancenet::cli::save_model(path, model);
  auto loaded = dancenet::cli::load_model(path, run.model());
  REQUIRE(loaded.store.size() == model.store.size());
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    CHECK(loaded.store.name(i) == model.store.name(i));
    for (std::size_t k = 0; k < model.store.value(i).size(); ++k) {
      CHECK(loaded.store.value(i)[k] == model.store.value(i)[k]);
    }
  }
  run.set("num_classes", "5");
  CHECK_ERROR_CODE(dancenet::cli::load_model(path, run.model()), ErrorCode::kVersion);
  run.set("num_classes", "4");
  run.set("use_density", "false");
  CHECK_ERROR_CODE(dancenet::cli::load_model(path, run.model()), ErrorCode::kVersion);
  fs::remove_all(dir);
}

TEST_CASE("scene loading") {
  RunConfig run;
  CHECK_ERROR_CODE(dancenet::cli::load_scene(run, "train_file"), ErrorCode::kConfig);
  run.set("synth_preset", "desk");
  const auto scene = dancenet::cli::load_scene(run, "train_file");
  CHECK(scene.channel(dancenet::kHeightChannel).has_value());
  CHECK(scene.labels.has_value());
  auto copy = scene;
  const auto blocks = dancenet::cli::prepare_blocks(run, copy);
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.cloud.size();
  CHECK(total == scene.size());
}

TEST_CASE("prediction covers every point") {
  RunConfig run;
  run.set("synth_preset", "desk");
  run.set("num_classes", "4");
  auto model = dancenet::cli::create_model(run.model(), 0);
  auto scene = dancenet::cli::load_scene(run, "input_file");
  const auto pred = dancenet::cli::predict_scene(model, run, scene);
  CHECK(pred.size() == scene.size());
  for (int p : pred) {
    CHECK(p >= 0);
    CHECK(p < 4);
  }
}

}  // TEST_SUITE
