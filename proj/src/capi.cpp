#include "dancenet/dancenet.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "dancenet/cli.hpp"
#include "dancenet/data.hpp"
#include "dancenet/diff/ops.hpp"
#include "dancenet/error.hpp"
#include "dancenet/metrics.hpp"
#include "dancenet/rng.hpp"

struct dn_config {
  dancenet::cli::RunConfig run;
};

struct dn_cloud {
  dancenet::PointCloud cloud;
};

struct dn_model {
  dancenet::cli::Model model;
};

namespace {

thread_local std::string g_last_error;

dn_status set_error(dn_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
dn_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const dancenet::Error& e) {
    return set_error(static_cast<dn_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(DN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(DN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(DN_ERR_INTERNAL, "unknown exception");
  }
}

dn_status null_argument(const char* what) { return set_error(DN_ERR_ARGUMENT, std::string(what) + " is null"); }

dn_status copy_out(const std::string& s, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size();
  if (buf && capacity > 0) {
    const size_t n = s.size() < capacity - 1 ? s.size() : capacity - 1;
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
    if (n < s.size()) return set_error(DN_ERR_SIZE, "buffer too small");
  } else if (!needed) {
    return null_argument("buf");
  }
  return DN_OK;
}

// Streams workflow output to the caller's callback line by line.
class CallbackBuf : public std::stringbuf {
 public:
  CallbackBuf(dn_write_fn fn, void* user) : fn_(fn), user_(user) {}
  ~CallbackBuf() override { flush_out(); }

  int sync() override {
    flush_out();
    return 0;
  }

 protected:
  int_type overflow(int_type ch) override {
    const int_type r = std::stringbuf::overflow(ch);
    if (ch == '\n') flush_out();
    return r;
  }

 private:
  void flush_out() {
    const std::string s = str();
    if (!s.empty() && fn_) fn_(s.data(), s.size(), user_);
    str(std::string());
  }

  dn_write_fn fn_;
  void* user_;
};

template <class F>
dn_status run_workflow(const dn_config* config, dn_write_fn write, void* user, F&& f) {
  if (!config) return null_argument("config");
  return guarded([&] {
    CallbackBuf buf(write, user);
    std::ostream out(&buf);
    const dn_status s = f(config->run, out);
    out.flush();
    return s;
  });
}

}  // namespace

extern "C" {

const char* dn_version(void) { return "1.0.0"; }

const char* dn_status_name(dn_status status) {
  if (status == DN_OK) return "ok";
  if (status == DN_ERR_ARGUMENT) return "invalid argument";
  if (status >= DN_ERR_SIZE && status <= DN_ERR_INTERNAL) {
    return dancenet::error_code_name(static_cast<dancenet::ErrorCode>(static_cast<int>(status)));
  }
  return "unknown status";
}

const char* dn_last_error(void) { return g_last_error.c_str(); }

dn_status dn_config_create(dn_config** out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new dn_config();
    return DN_OK;
  });
}

void dn_config_destroy(dn_config* config) { delete config; }

dn_status dn_config_set(dn_config* config, const char* key, const char* value) {
  if (!config) return null_argument("config");
  if (!key || !value) return null_argument("key/value");
  return guarded([&] {
    config->run.set(key, value);
    return DN_OK;
  });
}

dn_status dn_config_load_file(dn_config* config, const char* path) {
  if (!config) return null_argument("config");
  if (!path) return null_argument("path");
  return guarded([&] {
    config->run.load_file(path);
    return DN_OK;
  });
}

dn_status dn_config_get(const dn_config* config, const char* key, char* buf, size_t capacity, size_t* needed) {
  if (!config) return null_argument("config");
  if (!key) return null_argument("key");
  return guarded([&] { return copy_out(config->run.get(key), buf, capacity, needed); });
}

dn_status dn_config_dump(const dn_config* config, char* buf, size_t capacity, size_t* needed) {
  if (!config) return null_argument("config");
  return guarded([&] { return copy_out(config->run.dump(), buf, capacity, needed); });
}

dn_status dn_cloud_read(const char* path, dn_cloud** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto c = std::make_unique<dn_cloud>();
    c->cloud = dancenet::read_pts_file(path);
    *out = c.release();
    return DN_OK;
  });
}

dn_status dn_cloud_synth(const dn_config* config, dn_cloud** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  return guarded([&] {
    const std::string preset = config->run.get("synth_preset");
    dancenet::Rng rng(config->run.synth_seed());
    auto c = std::make_unique<dn_cloud>();
    c->cloud = dancenet::synth_scene(dancenet::SynthSpec::preset(preset.empty() ? "desk" : preset), rng);
    *out = c.release();
    return DN_OK;
  });
}

void dn_cloud_destroy(dn_cloud* cloud) { delete cloud; }

size_t dn_cloud_size(const dn_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

int dn_cloud_has_labels(const dn_cloud* cloud) { return cloud && cloud->cloud.labels ? 1 : 0; }

dn_status dn_cloud_positions(const dn_cloud* cloud, double* xyz) {
  if (!cloud) return null_argument("cloud");
  if (!xyz) return null_argument("xyz");
  for (const auto& p : cloud->cloud.positions) {
    *xyz++ = p.x;
    *xyz++ = p.y;
    *xyz++ = p.z;
  }
  return DN_OK;
}

dn_status dn_cloud_labels(const dn_cloud* cloud, int* labels) {
  if (!cloud) return null_argument("cloud");
  if (!labels) return null_argument("labels");
  if (!cloud->cloud.labels) return set_error(DN_ERR_DATA, "cloud has no labels");
  std::memcpy(labels, cloud->cloud.labels->data(), cloud->cloud.labels->size() * sizeof(int));
  return DN_OK;
}

dn_status dn_cloud_write(const dn_cloud* cloud, const char* path) {
  if (!cloud) return null_argument("cloud");
  if (!path) return null_argument("path");
  return guarded([&] {
    dancenet::write_pts_file(path, cloud->cloud);
    return DN_OK;
  });
}

dn_status dn_model_create(const dn_config* config, dn_model** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto m = std::make_unique<dn_model>();
    m->model = dancenet::cli::create_model(config->run.model(), config->run.seed());
    *out = m.release();
    return DN_OK;
  });
}

dn_status dn_model_load(const dn_config* config, const char* checkpoint, dn_model** out) {
  if (!config) return null_argument("config");
  if (!checkpoint) return null_argument("checkpoint");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto m = std::make_unique<dn_model>();
    m->model = dancenet::cli::load_model(checkpoint, config->run.model());
    *out = m.release();
    return DN_OK;
  });
}

dn_status dn_model_save(const dn_model* model, const char* path) {
  if (!model) return null_argument("model");
  if (!path) return null_argument("path");
  return guarded([&] {
    dancenet::cli::save_model(path, model->model);
    return DN_OK;
  });
}

void dn_model_destroy(dn_model* model) { delete model; }

size_t dn_model_parameter_count(const dn_model* model) { return model ? model->model.store.parameter_count() : 0; }

size_t dn_model_num_classes(const dn_model* model) { return model ? model->model.config.num_classes : 0; }

dn_status dn_model_predict(dn_model* model, const dn_config* config, const dn_cloud* cloud, int* labels) {
  if (!model) return null_argument("model");
  if (!config) return null_argument("config");
  if (!cloud) return null_argument("cloud");
  if (!labels) return null_argument("labels");
  return guarded([&] {
    dancenet::PointCloud scene = cloud->cloud;
    if (!scene.channel(dancenet::kHeightChannel)) {
      scene.add_channel(dancenet::kHeightChannel, dancenet::height_above_ground(scene, config->run.hag_cell()));
    }
    const auto pred = dancenet::cli::predict_scene(model->model, config->run, std::move(scene));
    std::memcpy(labels, pred.data(), pred.size() * sizeof(int));
    return DN_OK;
  });
}

dn_status dn_scores(const int* predicted, const int* truth, size_t n, size_t classes, double* overall_accuracy,
                    double* average_f1, double* per_class_f1) {
  if ((!predicted || !truth) && n > 0) return null_argument("predicted/truth");
  return guarded([&] {
    const auto cm = dancenet::confusion_matrix({predicted, n}, {truth, n}, classes);
    const auto s = dancenet::scores(cm);
    if (overall_accuracy) *overall_accuracy = s.overall_accuracy;
    if (average_f1) *average_f1 = s.average_f1;
    if (per_class_f1) {
      for (size_t c = 0; c < classes; ++c) per_class_f1[c] = s.per_class[c].f1;
    }
    return DN_OK;
  });
}

dn_status dn_cmd_train(const dn_config* config, dn_write_fn write, void* user) {
  return run_workflow(config, write, user, [](const auto& run, std::ostream& out) {
    dancenet::cli::cmd_train(run, out);
    return DN_OK;
  });
}

dn_status dn_cmd_eval(const dn_config* config, dn_write_fn write, void* user) {
  return run_workflow(config, write, user, [](const auto& run, std::ostream& out) {
    dancenet::cli::cmd_eval(run, out);
    return DN_OK;
  });
}

dn_status dn_cmd_predict(const dn_config* config, dn_write_fn write, void* user) {
  return run_workflow(config, write, user, [](const auto& run, std::ostream& out) {
    dancenet::cli::cmd_predict(run, out);
    return DN_OK;
  });
}

dn_status dn_cmd_gradcheck(const dn_config* config, dn_write_fn write, void* user) {
  return run_workflow(config, write, user, [](const auto& run, std::ostream& out) {
    if (dancenet::cli::cmd_gradcheck(run, out)) return DN_OK;
    return set_error(DN_CHECK_FAILED, "gradient check exceeded the tolerance");
  });
}

dn_status dn_cmd_synth(const dn_config* config, dn_write_fn write, void* user) {
  return run_workflow(config, write, user, [](const auto& run, std::ostream& out) {
    dancenet::cli::cmd_synth(run, out);
    return DN_OK;
  });
}

void dn_debug_set_backward_fault(int enabled) { dancenet::diff::testing::set_corrupt_matmul_backward(enabled != 0); }

}  // extern "C"
