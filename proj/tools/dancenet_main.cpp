// dancenet command-line driver over the C API.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dancenet/dancenet.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitError = 2;

void write_stdout(const char* text, size_t length, void*) {
  std::fwrite(text, 1, length, stdout);
  std::fflush(stdout);
}

int report(dn_status s) {
  if (s == DN_OK) return kExitOk;
  std::fprintf(stderr, "dancenet: %s: %s\n", dn_status_name(s), dn_last_error());
  return s == DN_CHECK_FAILED ? kExitCheckFailed : kExitError;
}

struct ConfigHandle {
  dn_config* ptr = nullptr;
  ~ConfigHandle() { dn_config_destroy(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DANCE-NET point cloud classifier: train, evaluate, predict, check gradients, synthesize scenes"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", dn_version());

  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  bool fault = false;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed, "random seed (overrides the config)")->check(CLI::NonNegativeNumber);
  app.add_option("--set", overrides, "override one config key: --set key=value")->take_all();
  app.add_flag("--inject-backward-fault", fault)->group("");

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint plus CSV log");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labeled scene");
  auto* predict = app.add_subcommand("predict", "write per-point labels for an ASCII scene");
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  auto* synth = app.add_subcommand("synth", "write a synthetic labeled scene");
  for (auto* sub : {train, eval, predict, gradcheck, synth}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  ConfigHandle cfg;
  if (int rc = report(dn_config_create(&cfg.ptr))) return rc;
  if (!config_path.empty()) {
    if (int rc = report(dn_config_load_file(cfg.ptr, config_path.c_str()))) return rc;
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "dancenet: --set expects key=value, got '%s'\n", kv.c_str());
      return kExitError;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (int rc = report(dn_config_set(cfg.ptr, key.c_str(), value.c_str()))) return rc;
  }
  if (seed >= 0) {
    if (int rc = report(dn_config_set(cfg.ptr, "seed", std::to_string(seed).c_str()))) return rc;
  }
  dn_debug_set_backward_fault(fault ? 1 : 0);

  if (*train) return report(dn_cmd_train(cfg.ptr, write_stdout, nullptr));
  if (*eval) return report(dn_cmd_eval(cfg.ptr, write_stdout, nullptr));
  if (*predict) return report(dn_cmd_predict(cfg.ptr, write_stdout, nullptr));
  if (*gradcheck) return report(dn_cmd_gradcheck(cfg.ptr, write_stdout, nullptr));
  return report(dn_cmd_synth(cfg.ptr, write_stdout, nullptr));
}
