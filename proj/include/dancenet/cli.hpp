#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dancenet/data.hpp"
#include "dancenet/diff/grad_check.hpp"
#include "dancenet/diff/param_store.hpp"
#include "dancenet/geom.hpp"
#include "dancenet/model.hpp"

namespace dancenet::cli {

// Flat key=value run configuration. Keys not in the known set are rejected.
// "preset" (desk or full) supplies the defaults of every key left unset.
class RunConfig {
 public:
  RunConfig() = default;

  static const std::vector<std::string>& known_keys();

  void set(const std::string& key, const std::string& value);
  // "key=value" lines; blank lines and '#' comments are skipped.
  void load_file(const std::string& path);
  void load_text(std::istream& in, const std::string& origin = "<config>");

  // Effective value: explicit setting, else the preset default.
  std::string get(const std::string& key) const;
  bool is_set(const std::string& key) const { return explicit_.count(key) > 0; }
  // Throws a config error naming the key when it is empty.
  std::string require(const std::string& key) const;

  std::string preset() const;
  std::uint64_t seed() const;
  std::uint64_t synth_seed() const;

  DanceNetConfig model() const;
  TrainOptions train_options() const;
  double grid() const;
  std::size_t min_points() const;
  double hag_cell() const;
  std::vector<std::string> class_names() const;

  // Every known key with its effective value, sorted, one per line. Loading
  // the dump reproduces this configuration exactly.
  std::string dump() const;

 private:
  std::map<std::string, std::string> explicit_;
};

// Reads the labeled or unlabeled scene named by `file_key`, or generates the
// configured synthetic scene when the key is unset and synth_preset is set.
// The height channel is added before returning.
PointCloud load_scene(const RunConfig& run, const std::string& file_key);

// Tiles the scene; adds the HAG channel first when it is missing.
std::vector<SceneBlock> prepare_blocks(const RunConfig& run, PointCloud& scene);

// Model parameters plus the architecture they belong to.
struct Model {
  DanceNetConfig config;
  diff::ParamStore store;
};

Model create_model(const DanceNetConfig& cfg, std::uint64_t seed);
void save_model(const std::string& path, const Model& model);
// Loads a checkpoint; the stored architecture must equal `expected`.
Model load_model(const std::string& path, const DanceNetConfig& expected);

// Tiles the scene, forwards every block unsampled and scatters the
// predictions back into the scene's point order.
std::vector<int> predict_scene(Model& model, const RunConfig& run, PointCloud scene);

struct GroupReport {
  std::string name;                 // parameter prefix such as "down1.kernel"
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  std::vector<std::string> offenders;  // tensors above tolerance
};

struct GradcheckResult {
  std::vector<GroupReport> groups;
  diff::GradCheckReport detail;
  std::vector<diff::DirectionalCheck> directions;  // informational
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  bool passed = false;
};

// Random labeled instance of gradcheck_points points checked through the
// full loss.
GradcheckResult run_gradcheck(const RunConfig& run);

// Workflows behind the subcommands. Messages go to `out`; failures throw
// dancenet::Error. cmd_gradcheck returns false when a group breaches the
// tolerance.
void cmd_train(const RunConfig& run, std::ostream& out);
void cmd_eval(const RunConfig& run, std::ostream& out);
void cmd_predict(const RunConfig& run, std::ostream& out);
bool cmd_gradcheck(const RunConfig& run, std::ostream& out);
void cmd_synth(const RunConfig& run, std::ostream& out);

}  // namespace dancenet::cli
