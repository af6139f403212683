#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "koopgen/dynamics.hpp"
#include "koopgen/kernels.hpp"

namespace koopgen {

// Flat `key = value` run configuration. Lines starting with '#' are comments.
// Times are in model time units; counts are sample counts.
struct PipelineConfig {
  SystemKind system = SystemKind::kTorusRotation;
  double alpha = FlowSystem::default_alpha();
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;

  std::int64_t N = 60000;
  double dt = 0.0;
  std::int64_t spinup = 0;  // samples of length dt
  int substeps = 0;         // 0 picks the smallest count with step <= 0.01
  std::uint64_t seed = 1;

  KernelConfig kernel;

  std::int64_t L = 400;
  double z = 0.1;
  double tau = 3e-3;

  std::int64_t test_N = 2000;
  double test_dt = 0.01;
  std::uint64_t test_seed = 2;

  std::vector<std::int64_t> select;  // 1-based sorted mode indices
  double max_lag = 20.0;

  std::string output_dir = "out";
  bool cache = true;
  bool dump_matrices = false;

  FlowSystem flow_system() const;
  int resolved_substeps() const;
  int resolved_test_substeps() const;
  // Spinup of the test trajectory, covering the same model time as the
  // training spinup.
  std::int64_t test_spinup() const;
  // Lags 0 .. max_lag_steps() - 1 of the test sampling interval.
  std::int64_t max_lag_steps() const;
  std::vector<Index> selected_indices() const;  // 0-based

  bool operator==(const PipelineConfig&) const = default;
};

// Parameters of the full-scale experiments for each system.
PipelineConfig default_config(SystemKind system);
// Shrinks a configuration to N = 5000, L = 50, test_N = 1000.
void apply_desk_preset(PipelineConfig& config);

// Throws kValidation describing the first offending key.
void validate(const PipelineConfig& config);

// Sets one key from its text value; throws kValidation for unknown keys or
// malformed values. Setting `system` resets nothing else.
void set_config_value(PipelineConfig& config, std::string_view key,
                      std::string_view value);
std::vector<std::string> config_keys();

// Starts from default_config of the file's `system` (torus if absent), then
// applies every key in file order.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const PipelineConfig& config);

}  // namespace koopgen
