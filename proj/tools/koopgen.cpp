// Command line driver for the koopgen pipeline.
//
//   koopgen run --system lorenz63 --desk --out runs/l63
//   koopgen autocorr --config runs/l63.cfg --j 1,2 --max-lag 2
//
// Settings are resolved as: per-system defaults, then --config file, then
// --desk, then individual flags. KOOPGEN_THREADS caps OpenMP threads.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fmt/core.h>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "koopgen/config.hpp"
#include "koopgen/error.hpp"
#include "koopgen/pipeline.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::string system;
  bool desk = false;
  bool dry_run = false;
  bool no_cache = false;
  std::vector<std::string> set;
  std::vector<std::string> select;
  std::map<std::string, std::string> overrides;
};

// Flags that map one-to-one onto config keys.
const std::vector<std::pair<std::string, std::string>> kKeyFlags = {
    {"--N", "N"},
    {"--dt", "dt"},
    {"--spinup", "spinup"},
    {"--substeps", "substeps"},
    {"--seed", "seed"},
    {"--alpha", "alpha"},
    {"--pilot-exponent", "pilot_exponent"},
    {"--L", "L"},
    {"--z", "z"},
    {"--tau", "tau"},
    {"--test-N", "test_N"},
    {"--test-dt", "test_dt"},
    {"--test-seed", "test_seed"},
    {"--max-lag", "max_lag"},
    {"--out", "output_dir"},
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("-c,--config", f.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--system", f.system, "torus | stepanoff | lorenz63");
  cmd->add_flag("--desk", f.desk, "scaled preset: N=5000, L=50, test_N=1000");
  cmd->add_flag("--dry-run", f.dry_run, "print the resolved plan and exit");
  cmd->add_flag("--no-cache", f.no_cache, "recompute even when artifacts match");
  cmd->add_option("--set", f.set, "override any config key: key=value");
  cmd->add_option("--j", f.select, "modes to export, 1-based (comma separated)")->delimiter(',');
  for (const auto& [flag, key] : kKeyFlags) {
    const std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&f, k](const std::string& v) { f.overrides[k] = v; }, "config key " + k);
  }
}

koopgen::PipelineConfig resolve(const Flags& f) {
  using namespace koopgen;
  PipelineConfig config;
  if (!f.config_path.empty()) {
    config = load_config(f.config_path);
    if (!f.system.empty()) config.system = parse_system_kind(f.system);
  } else {
    config = default_config(f.system.empty() ? SystemKind::kTorusRotation
                                             : parse_system_kind(f.system));
  }
  if (f.desk) apply_desk_preset(config);
  for (const auto& [k, v] : f.overrides) set_config_value(config, k, v);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kValidation, "--set expects key=value, got '" + kv + "'");
    }
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.select.empty()) {
    std::string joined;
    for (const auto& s : f.select) joined += (joined.empty() ? "" : ",") + s;
    set_config_value(config, "select", joined);
  }
  if (f.no_cache) config.cache = false;
  validate(config);
  return config;
}

void apply_thread_env() {
  if (const char* env = std::getenv("KOOPGEN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

std::string stage_help(koopgen::Stage stage) {
  switch (stage) {
    case koopgen::Stage::kSimulate: return "sample training and test trajectories";
    case koopgen::Stage::kTune: return "tune the pilot density and kernel bandwidth";
    case koopgen::Stage::kBasis: return "build the diffusion eigenbasis";
    case koopgen::Stage::kEigs: return "assemble and solve the generator eigenproblem";
    case koopgen::Stage::kEvaluate: return "evaluate eigenfunctions in and out of sample";
    case koopgen::Stage::kAutocorr: return "autocorrelation of eigenfunctions on the test orbit";
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel spectral approximation of Koopman generators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", koopgen::version_string());

  Flags flags;
  std::vector<std::pair<CLI::App*, std::vector<koopgen::Stage>>> commands;
  for (auto stage : koopgen::all_stages()) {
    auto* cmd = app.add_subcommand(std::string(koopgen::to_string(stage)), stage_help(stage));
    add_common(cmd, flags);
    commands.push_back({cmd, {stage}});
  }
  auto* run = app.add_subcommand("run", "all stages in order");
  add_common(run, flags);
  commands.push_back({run, koopgen::all_stages()});

  auto* show = app.add_subcommand("config", "print the resolved configuration");
  add_common(show, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_thread_env();
    const auto config = resolve(flags);
    if (show->parsed()) {
      fmt::print("{}", koopgen::serialize_config(config));
      return 0;
    }
    for (const auto& [cmd, stages] : commands) {
      if (!cmd->parsed()) continue;
      if (flags.dry_run) {
        fmt::print("{}", koopgen::describe_plan(config, stages));
        return 0;
      }
      koopgen::RunOptions options;
      options.log = [](std::string_view line) { fmt::print("{}\n", line); };
      const auto manifest = koopgen::run_pipeline(config, stages, options);
      for (const auto& w : manifest.warnings) fmt::print(stderr, "warning: {}\n", w);
      fmt::print("{} files listed in {}/manifest.json\n", manifest.files.size(),
                 config.output_dir);
    }
    return 0;
  } catch (const koopgen::Error& e) {
    fmt::print(stderr, "error ({}): {}\n", koopgen::to_string(e.kind()), e.what());
    return koopgen::exit_code(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
