#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "koopgen/config.hpp"

namespace koopgen {

enum class Stage { kSimulate, kTune, kBasis, kEigs, kEvaluate, kAutocorr };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);
std::vector<Stage> all_stages();

struct StageReport {
  Stage stage = Stage::kSimulate;
  std::string key;
  bool cached = false;
  double seconds = 0.0;
};

struct RunManifest {
  std::string config_text;
  std::map<std::string, std::string> files;  // name -> sha256
  std::vector<StageReport> stages;
  std::vector<std::string> warnings;
};

struct RunOptions {
  // Runs upstream stages too when their artifacts are missing.
  bool with_dependencies = false;
  std::function<void(std::string_view)> log;
};

// Artifacts written per stage into config.output_dir:
//   simulate  dataset.csv/.json, test_dataset.csv/.json
//   tune      bandwidth.csv, bandwidth.json
//   basis     basis_{d,q,lambda,phi,gamma}.bin, basis.json
//   eigs      generator.bin, eigs.csv, eigs_{c,d}.bin, eigs.json
//   evaluate  zeta_train.csv, zeta_test.csv
//   autocorr  autocorr.csv
// plus stages/<stage>.json stamps and manifest.json. A stage is skipped when
// its stamp key (inputs, upstream hashes and version) matches and its files
// are intact. A failing stage leaves <stage>.failed behind.
RunManifest run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages,
                         const RunOptions& options = {});

// Human-readable description of what run_pipeline would do.
std::string describe_plan(const PipelineConfig& config, const std::vector<Stage>& stages);

std::string version_string();

}  // namespace koopgen
