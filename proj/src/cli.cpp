#include "dancenet/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dancenet/diff/checkpoint.hpp"
#include "dancenet/error.hpp"
#include "dancenet/metrics.hpp"
#include "dancenet/rng.hpp"

namespace dancenet::cli {

namespace {

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += format_real(xs[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      s += xs[i];
    } else {
      s += std::to_string(xs[i]);
    }
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    fail(ErrorCode::kConfig, "key '" + key + "' expects a nonnegative integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    fail(ErrorCode::kConfig, "key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  fail(ErrorCode::kConfig, "key '" + key + "' expects true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_counts(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_count(key, item));
  return out;
}

using Defaults = std::map<std::string, std::string>;

Defaults preset_defaults(const std::string& preset) {
  DanceNetConfig m;
  TrainOptions t;
  if (preset == "desk") {
    m = DanceNetConfig::desk();
    t.epochs = 200;
    t.sample_points = 2048;
  } else if (preset == "full") {
    m = DanceNetConfig::full();
  } else {
    fail(ErrorCode::kConfig, "key 'preset' must be desk or full, got '" + preset + "'");
  }
  return {
      {"preset", preset},
      {"train_file", ""},
      {"test_file", ""},
      {"input_file", ""},
      {"checkpoint", ""},
      {"output", ""},
      {"out_dir", "dancenet_out"},
      {"synth_preset", ""},
      {"synth_seed", ""},
      {"class_names", ""},
      {"seed", "0"},
      {"epochs", std::to_string(t.epochs)},
      {"batch_size", std::to_string(t.batch_size)},
      {"learning_rate", format_real(t.learning_rate)},
      {"lr_decay_steps", std::to_string(t.lr_decay_steps)},
      {"lr_decay", format_real(t.lr_decay)},
      {"sample_points", std::to_string(t.sample_points)},
      {"dropout", format_real(t.dropout)},
      {"grid", format_real(kDefaultGridSize)},
      {"min_points", std::to_string(kDefaultMinBlockPoints)},
      {"hag_cell", format_real(kDefaultHagCell)},
      {"num_classes", std::to_string(m.num_classes)},
      {"down_points", join(m.down_points)},
      {"down_channels", join(m.down_channels)},
      {"up_channels", join(m.up_channels)},
      {"base_radius", format_real(m.base_radius)},
      {"base_bandwidth", format_real(m.base_bandwidth)},
      {"max_neighbors", std::to_string(m.max_neighbors)},
      {"kernel_hidden", std::to_string(m.kernel_hidden)},
      {"context_hidden", std::to_string(m.context_hidden)},
      {"lambda", format_real(m.lambda)},
      {"alpha", format_real(m.alpha)},
      {"input_features", join(m.input_features)},
      {"use_density", m.use_density ? "true" : "false"},
      {"use_context", m.use_context ? "true" : "false"},
      {"gradcheck_points", "32"},
      {"gradcheck_extent", "20"},
      {"gradcheck_bias", "0.1"},
      {"gradcheck_eps", "1e-05"},
      {"gradcheck_tolerance", "0.0001"},
  };
}

const Defaults& desk_defaults() {
  static const Defaults d = preset_defaults("desk");
  return d;
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, value] : desk_defaults()) k.push_back(key);
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!desk_defaults().count(key)) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  if (key == "preset") preset_defaults(value);  // validates
  explicit_[key] = value;
}

void RunConfig::load_text(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(number) + ": expected key=value");
    }
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file '" + path + "'");
  load_text(in, path);
}

std::string RunConfig::preset() const {
  auto it = explicit_.find("preset");
  return it == explicit_.end() ? "desk" : it->second;
}

std::string RunConfig::get(const std::string& key) const {
  if (auto it = explicit_.find(key); it != explicit_.end()) return it->second;
  const Defaults d = preset_defaults(preset());
  auto it = d.find(key);
  if (it == d.end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::require(const std::string& key) const {
  std::string v = get(key);
  if (v.empty()) fail(ErrorCode::kConfig, "missing required key '" + key + "'");
  return v;
}

std::uint64_t RunConfig::seed() const { return parse_count("seed", get("seed")); }

std::uint64_t RunConfig::synth_seed() const {
  const std::string s = get("synth_seed");
  return s.empty() ? seed() : parse_count("synth_seed", s);
}

DanceNetConfig RunConfig::model() const {
  DanceNetConfig m;
  m.num_classes = parse_count("num_classes", get("num_classes"));
  m.down_points = parse_counts("down_points", get("down_points"));
  m.down_channels = parse_counts("down_channels", get("down_channels"));
  m.up_channels = parse_counts("up_channels", get("up_channels"));
  m.base_radius = parse_real("base_radius", get("base_radius"));
  m.base_bandwidth = parse_real("base_bandwidth", get("base_bandwidth"));
  m.max_neighbors = parse_count("max_neighbors", get("max_neighbors"));
  m.kernel_hidden = parse_count("kernel_hidden", get("kernel_hidden"));
  m.context_hidden = parse_count("context_hidden", get("context_hidden"));
  m.lambda = parse_real("lambda", get("lambda"));
  m.alpha = parse_real("alpha", get("alpha"));
  m.input_features = split_list(get("input_features"));
  m.use_density = parse_bool("use_density", get("use_density"));
  m.use_context = parse_bool("use_context", get("use_context"));
  m.validate();
  return m;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions t;
  t.epochs = parse_count("epochs", get("epochs"));
  t.batch_size = parse_count("batch_size", get("batch_size"));
  t.learning_rate = parse_real("learning_rate", get("learning_rate"));
  t.lr_decay_steps = parse_count("lr_decay_steps", get("lr_decay_steps"));
  t.lr_decay = parse_real("lr_decay", get("lr_decay"));
  t.sample_points = parse_count("sample_points", get("sample_points"));
  t.dropout = parse_real("dropout", get("dropout"));
  t.seed = seed();
  if (t.epochs == 0) fail(ErrorCode::kConfig, "key 'epochs' must be > 0");
  if (t.batch_size == 0) fail(ErrorCode::kConfig, "key 'batch_size' must be > 0");
  if (!(t.learning_rate > 0.0)) fail(ErrorCode::kConfig, "key 'learning_rate' must be > 0");
  if (!(t.lr_decay > 0.0)) fail(ErrorCode::kConfig, "key 'lr_decay' must be > 0");
  if (t.sample_points == 0) fail(ErrorCode::kConfig, "key 'sample_points' must be > 0");
  if (!(t.dropout >= 0.0 && t.dropout < 1.0)) fail(ErrorCode::kConfig, "key 'dropout' must lie in [0, 1)");
  return t;
}

double RunConfig::grid() const {
  const double g = parse_real("grid", get("grid"));
  if (!(g > 0.0)) fail(ErrorCode::kConfig, "key 'grid' must be > 0");
  return g;
}

std::size_t RunConfig::min_points() const { return parse_count("min_points", get("min_points")); }

double RunConfig::hag_cell() const {
  const double c = parse_real("hag_cell", get("hag_cell"));
  if (!(c > 0.0)) fail(ErrorCode::kConfig, "key 'hag_cell' must be > 0");
  return c;
}

std::vector<std::string> RunConfig::class_names() const {
  auto names = split_list(get("class_names"));
  if (names.empty() && !get("synth_preset").empty()) {
    for (const auto& c : SynthSpec::preset(get("synth_preset")).classes) names.push_back(c.name);
  }
  return names;
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  for (const auto& key : known_keys()) out << key << '=' << get(key) << '\n';
  return out.str();
}

PointCloud load_scene(const RunConfig& run, const std::string& file_key) {
  PointCloud scene;
  const std::string path = run.get(file_key);
  if (!path.empty()) {
    scene = read_pts_file(path);
  } else if (!run.get("synth_preset").empty()) {
    Rng rng(run.synth_seed());
    scene = synth_scene(SynthSpec::preset(run.get("synth_preset")), rng);
  } else {
    fail(ErrorCode::kConfig, "missing required key '" + file_key + "' (or set synth_preset)");
  }
  const auto hag = height_above_ground(scene, run.hag_cell());
  scene.add_channel(kHeightChannel, hag);
  return scene;
}

std::vector<SceneBlock> prepare_blocks(const RunConfig& run, PointCloud& scene) {
  if (!scene.channel(kHeightChannel)) {
    const auto hag = height_above_ground(scene, run.hag_cell());
    scene.add_channel(kHeightChannel, hag);
  }
  return tile_blocks(scene, run.grid(), run.min_points());
}

namespace {

constexpr const char* kMetaPrefix = "meta/";

double feature_code(const std::string& name) {
  if (name == kHeightChannel) return 0.0;
  if (name == kReflectanceChannel) return 1.0;
  if (name == kReturnCountChannel) return 2.0;
  fail(ErrorCode::kConfig, "unknown input feature '" + name + "'");
}

diff::Tensor counts_tensor(const std::vector<std::size_t>& xs) {
  std::vector<double> v(xs.begin(), xs.end());
  return diff::Tensor({xs.size()}, std::move(v));
}

// Architecture fields that decide parameter shapes or geometry.
std::vector<diff::CheckpointRecord> meta_records(const DanceNetConfig& c) {
  std::vector<double> features;
  for (const auto& f : c.input_features) features.push_back(feature_code(f));
  std::vector<diff::CheckpointRecord> r;
  auto add = [&](const std::string& name, diff::Tensor t) { r.push_back({kMetaPrefix + name, std::move(t)}); };
  add("num_classes", diff::Tensor::scalar(static_cast<double>(c.num_classes)));
  add("down_points", counts_tensor(c.down_points));
  add("down_channels", counts_tensor(c.down_channels));
  add("up_channels", counts_tensor(c.up_channels));
  add("base_radius", diff::Tensor::scalar(c.base_radius));
  add("base_bandwidth", diff::Tensor::scalar(c.base_bandwidth));
  add("max_neighbors", diff::Tensor::scalar(static_cast<double>(c.max_neighbors)));
  add("kernel_hidden", diff::Tensor::scalar(static_cast<double>(c.kernel_hidden)));
  add("context_hidden", diff::Tensor::scalar(static_cast<double>(c.context_hidden)));
  add("input_features", diff::Tensor({features.size()}, features));
  add("use_density", diff::Tensor::scalar(c.use_density ? 1.0 : 0.0));
  add("use_context", diff::Tensor::scalar(c.use_context ? 1.0 : 0.0));
  return r;
}

std::string describe(const diff::Tensor& t) {
  std::string s;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) s += ',';
    s += format_real(t[i]);
  }
  return s;
}

}  // namespace

Model create_model(const DanceNetConfig& cfg, std::uint64_t seed) {
  Model m;
  m.config = cfg;
  init_params(m.store, cfg, seed);
  return m;
}

void save_model(const std::string& path, const Model& model) {
  auto records = meta_records(model.config);
  auto params = diff::store_records(model.store, true);
  records.insert(records.end(), std::make_move_iterator(params.begin()), std::make_move_iterator(params.end()));
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write checkpoint '" + path + "'");
  diff::write_checkpoint(out, records);
  if (!out) fail(ErrorCode::kIo, "write failed for checkpoint '" + path + "'");
}

Model load_model(const std::string& path, const DanceNetConfig& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  const auto records = diff::read_checkpoint(in);
  std::map<std::string, const diff::Tensor*> stored;
  for (const auto& r : records) {
    if (r.name.rfind(kMetaPrefix, 0) == 0) stored[r.name.substr(5)] = &r.tensor;
  }
  for (const auto& want : meta_records(expected)) {
    const std::string field = want.name.substr(5);
    auto it = stored.find(field);
    if (it == stored.end()) fail(ErrorCode::kVersion, "checkpoint '" + path + "' lacks model field '" + field + "'");
    const diff::Tensor& have = *it->second;
    if (have.shape() != want.tensor.shape() ||
        !std::equal(have.values().begin(), have.values().end(), want.tensor.values().begin())) {
      fail(ErrorCode::kVersion, "checkpoint '" + path + "' was trained with " + field + "=" + describe(have) +
                                    " but the config has " + field + "=" + describe(want.tensor));
    }
  }
  Model m = create_model(expected, 0);
  diff::load_store_records(m.store, records);
  return m;
}

std::vector<int> predict_scene(Model& model, const RunConfig& run, PointCloud scene) {
  const auto blocks = prepare_blocks(run, scene);
  std::vector<int> labels(scene.size(), -1);
  for (const SceneBlock& b : blocks) {
    const diff::Tensor probs = predict_probabilities(model.store, model.config, b.cloud);
    const auto pred = predict_labels(probs);
    for (std::size_t i = 0; i < pred.size(); ++i) labels[b.source_index[i]] = pred[i];
  }
  for (int l : labels) {
    if (l < 0) fail(ErrorCode::kInternal, "a point was not covered by any block");
  }
  return labels;
}

namespace {

std::filesystem::path prepare_out_dir(const RunConfig& run) {
  std::filesystem::path dir = run.get("out_dir");
  if (dir.empty()) dir = ".";
  std::filesystem::create_directories(dir);
  std::ofstream cfg(dir / "effective_config.txt");
  if (!cfg) fail(ErrorCode::kIo, "cannot write " + (dir / "effective_config.txt").string());
  cfg << run.dump();
  return dir;
}

std::string checkpoint_path(const RunConfig& run, const std::filesystem::path& dir) {
  const std::string p = run.get("checkpoint");
  return p.empty() ? (dir / "model.ckpt").string() : p;
}

std::string real17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Scores score_scene(Model& model, const RunConfig& run, const PointCloud& scene, ConfusionMatrix* cm_out,
                   std::size_t* evaluated) {
  if (!scene.labels) fail(ErrorCode::kData, "evaluation needs a labeled scene (6 columns)");
  const auto pred = predict_scene(model, run, scene);
  if (pred.size() != scene.size()) fail(ErrorCode::kInternal, "prediction count differs from the scene");
  ConfusionMatrix cm = confusion_matrix(pred, *scene.labels, model.config.num_classes);
  if (evaluated) *evaluated = pred.size();
  Scores s = scores(cm);
  if (cm_out) *cm_out = cm;
  return s;
}

}  // namespace

void cmd_train(const RunConfig& run, std::ostream& out) {
  const DanceNetConfig cfg = run.model();
  const TrainOptions opt = run.train_options();
  PointCloud scene = load_scene(run, "train_file");
  if (!scene.labels) fail(ErrorCode::kData, "training file has no label column");
  const auto dir = prepare_out_dir(run);
  const auto blocks = prepare_blocks(run, scene);
  std::vector<PointCloud> clouds;
  clouds.reserve(blocks.size());
  for (const auto& b : blocks) clouds.push_back(b.cloud);
  out << "training on " << scene.size() << " points in " << clouds.size() << " blocks, " << opt.epochs
      << " epochs\n";

  Model model = create_model(cfg, opt.seed);
  const auto log_path = dir / "train_log.csv";
  std::ofstream log(log_path);
  if (!log) fail(ErrorCode::kIo, "cannot write " + log_path.string());
  log << "step,lr,l_cls,l_ctx,l,oa\n";
  const std::size_t report_every = std::max<std::size_t>(1, opt.epochs / 10);
  std::size_t last_epoch = 0;
  double epoch_sum[4] = {0, 0, 0, 0};
  std::size_t epoch_steps = 0;
  auto flush_epoch = [&](std::size_t epoch) {
    if (epoch_steps == 0) return;
    if ((epoch + 1) % report_every == 0 || epoch + 1 == opt.epochs) {
      const double k = 1.0 / static_cast<double>(epoch_steps);
      out << "epoch " << epoch + 1 << "/" << opt.epochs << "  L_cls " << fixed(epoch_sum[0] * k, 5) << "  L_ctx "
          << fixed(epoch_sum[1] * k, 5) << "  L " << fixed(epoch_sum[2] * k, 5) << "  batch OA "
          << fixed(epoch_sum[3] * k, 4) << '\n';
    }
    std::fill(std::begin(epoch_sum), std::end(epoch_sum), 0.0);
    epoch_steps = 0;
  };
  train(model.store, cfg, clouds, opt, [&](const StepLog& s) {
    if (s.epoch != last_epoch) {
      flush_epoch(last_epoch);
      last_epoch = s.epoch;
    }
    log << s.step << ',' << real17(s.learning_rate) << ',' << real17(s.l_cls) << ',' << real17(s.l_ctx) << ','
        << real17(s.total) << ',' << real17(s.batch_accuracy) << '\n';
    epoch_sum[0] += s.l_cls;
    epoch_sum[1] += s.l_ctx;
    epoch_sum[2] += s.total;
    epoch_sum[3] += s.batch_accuracy;
    ++epoch_steps;
  });
  flush_epoch(last_epoch);
  log.close();

  const std::string ckpt = checkpoint_path(run, dir);
  save_model(ckpt, model);
  const Scores s = score_scene(model, run, scene, nullptr, nullptr);
  out << "train OA " << fixed(s.overall_accuracy, 4) << "  average F1 " << fixed(s.average_f1, 4) << '\n';
  out << "checkpoint " << ckpt << '\n';
  out << "log " << log_path.string() << '\n';
}

void cmd_eval(const RunConfig& run, std::ostream& out) {
  const DanceNetConfig cfg = run.model();
  const std::string ckpt = run.require("checkpoint");
  PointCloud scene = load_scene(run, "test_file");
  const auto dir = prepare_out_dir(run);
  Model model = load_model(ckpt, cfg);
  ConfusionMatrix cm(cfg.num_classes);
  std::size_t evaluated = 0;
  const Scores s = score_scene(model, run, scene, &cm, &evaluated);
  const auto names = run.class_names();
  out << "evaluated " << evaluated << " of " << scene.size() << " points\n";
  write_score_table(out, cm, s, names);
  const auto csv_path = dir / "scores.csv";
  std::ofstream csv(csv_path);
  if (!csv) fail(ErrorCode::kIo, "cannot write " + csv_path.string());
  write_score_csv(csv, s, names);
  out << "scores " << csv_path.string() << '\n';
}

void cmd_predict(const RunConfig& run, std::ostream& out) {
  const DanceNetConfig cfg = run.model();
  const std::string ckpt = run.require("checkpoint");
  run.require("input_file");
  const std::string output = run.require("output");
  PointCloud scene = load_scene(run, "input_file");
  prepare_out_dir(run);
  Model model = load_model(ckpt, cfg);
  const auto labels = predict_scene(model, run, scene);
  std::ofstream f(output);
  if (!f) fail(ErrorCode::kIo, "cannot write predictions to '" + output + "'");
  write_predictions(f, scene.positions, labels);
  if (!f) fail(ErrorCode::kIo, "write failed for '" + output + "'");
  out << "wrote " << labels.size() << " predictions to " << output << '\n';
}

GradcheckResult run_gradcheck(const RunConfig& run) {
  const DanceNetConfig cfg = run.model();
  const std::size_t n = parse_count("gradcheck_points", run.get("gradcheck_points"));
  const double extent = parse_real("gradcheck_extent", run.get("gradcheck_extent"));
  const double bias = parse_real("gradcheck_bias", run.get("gradcheck_bias"));
  const double eps = parse_real("gradcheck_eps", run.get("gradcheck_eps"));
  GradcheckResult result;
  result.tolerance = parse_real("gradcheck_tolerance", run.get("gradcheck_tolerance"));
  if (n == 0) fail(ErrorCode::kConfig, "key 'gradcheck_points' must be > 0");
  if (!(extent > 0.0)) fail(ErrorCode::kConfig, "key 'gradcheck_extent' must be > 0");
  if (!(eps > 0.0)) fail(ErrorCode::kConfig, "key 'gradcheck_eps' must be > 0");

  const std::uint64_t seed = run.seed();
  Rng rng = Rng::split(seed, 0x67726164);
  PointCloud cloud;
  std::vector<int> labels;
  std::vector<double> refl, returns;
  for (std::size_t i = 0; i < n; ++i) {
    cloud.positions.push_back({rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(0.0, 4.0)});
    labels.push_back(static_cast<int>(rng.below(cfg.num_classes)));
    refl.push_back(rng.uniform(0.0, 1.0));
    returns.push_back(static_cast<double>(1 + rng.below(3)));
  }
  cloud.labels = labels;
  cloud.add_channel(kReflectanceChannel, refl);
  cloud.add_channel(kReturnCountChannel, returns);
  cloud.add_channel(kHeightChannel, height_above_ground(cloud, run.hag_cell()));

  Model model = create_model(cfg, seed);
  // Random biases keep pre-activations off the ReLU kink, which zero biases
  // put exactly at zero for every center's own (zero-offset) member.
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    const std::string& name = model.store.name(i);
    const auto dot = name.rfind('.');
    if (dot == std::string::npos || name[dot + 1] != 'b') continue;
    for (double& v : model.store.value(i).values()) v = rng.uniform(-bias, bias);
  }
  const auto weights = class_weights(class_counts(labels, cfg.num_classes), cfg.alpha);
  const ForwardPlan plan = plan_forward(cloud.positions, cfg);
  const diff::Tensor features = input_features(cloud, cfg);

  const auto t0 = std::chrono::steady_clock::now();
  result.detail = diff::grad_check(
      [&](diff::Tape& tape, diff::ParamStore& store) {
        return block_loss(tape, store, cfg, plan, features, labels, weights).total;
      },
      model.store, eps);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<std::vector<double>> dirs(3);
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    Rng dr = Rng::split(seed, 0x646972 + d);
    dirs[d].resize(model.store.parameter_count());
    for (double& x : dirs[d]) x = dr.uniform(-1.0, 1.0);
  }
  result.directions = diff::directional_check(
      [&](diff::Tape& tape, diff::ParamStore& store) {
        return block_loss(tape, store, cfg, plan, features, labels, weights).total;
      },
      model.store, dirs, eps);

  for (const auto& p : result.detail.params) {
    const std::string group = p.name.substr(0, p.name.rfind('.'));
    if (result.groups.empty() || result.groups.back().name != group) result.groups.push_back(GroupReport{group, 0, 0.0, {}});
    GroupReport& g = result.groups.back();
    g.entries += p.entries;
    g.max_rel_error = std::max(g.max_rel_error, p.max_rel_error);
    if (!(p.max_rel_error < result.tolerance)) g.offenders.push_back(p.name);
  }
  result.max_rel_error = result.detail.max_rel_error;
  result.passed = std::all_of(result.groups.begin(), result.groups.end(),
                              [](const GroupReport& g) { return g.offenders.empty(); });
  return result;
}

bool cmd_gradcheck(const RunConfig& run, std::ostream& out) {
  prepare_out_dir(run);
  const GradcheckResult r = run_gradcheck(run);
  std::size_t params = 0;
  for (const auto& g : r.groups) params += g.entries;
  out << "gradcheck " << run.get("gradcheck_points") << " points, " << run.get("num_classes") << " classes, "
      << params << " parameters, eps " << run.get("gradcheck_eps") << ", tolerance " << sci(r.tolerance) << '\n';
  for (const auto& g : r.groups) {
    std::string name = g.name;
    name.resize(std::max<std::size_t>(name.size(), 22), ' ');
    out << name << ' ' << g.entries << "  " << sci(g.max_rel_error) << (g.offenders.empty() ? "  ok" : "  FAIL")
        << '\n';
  }
  out << "max relative error " << sci(r.max_rel_error) << " in " << fixed(r.seconds, 1) << " s\n";
  for (std::size_t d = 0; d < r.directions.size(); ++d) {
    const auto& dc = r.directions[d];
    out << "direction " << d << ": analytic " << sci(dc.analytic) << " numeric " << sci(dc.numeric)
        << " relative error " << sci(dc.rel_error) << '\n';
  }
  if (!r.passed) {
    out << "offending parameters:";
    for (const auto& p : r.detail.params) {
      if (!(p.max_rel_error < r.tolerance)) out << ' ' << p.name << " (" << sci(p.max_rel_error) << ")";
    }
    out << '\n';
  }
  return r.passed;
}

void cmd_synth(const RunConfig& run, std::ostream& out) {
  const std::string output = run.require("output");
  const std::string preset = run.get("synth_preset").empty() ? std::string("desk") : run.get("synth_preset");
  prepare_out_dir(run);
  Rng rng(run.synth_seed());
  const PointCloud scene = synth_scene(SynthSpec::preset(preset), rng);
  write_pts_file(output, scene);
  out << "wrote " << scene.size() << " points (" << preset << ") to " << output << '\n';
}

}  // namespace dancenet::cli
