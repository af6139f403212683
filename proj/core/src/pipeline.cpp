#include "koopgen/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>

#include "koopgen/basis.hpp"
#include "koopgen/error.hpp"
#include "koopgen/generator.hpp"
#include "koopgen/io.hpp"
#include "koopgen/kernels.hpp"
#include "koopgen/nystrom.hpp"

namespace koopgen {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct StageInfo {
  Stage stage;
  const char* name;
  std::vector<std::string> outputs;
};

const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> table = {
      {Stage::kSimulate, "simulate",
       {"dataset.csv", "dataset.json", "test_dataset.csv", "test_dataset.json"}},
      {Stage::kTune, "tune", {"bandwidth.csv", "bandwidth.json"}},
      {Stage::kBasis, "basis",
       {"basis_d.bin", "basis_q.bin", "basis_lambda.bin", "basis_phi.bin", "basis_gamma.bin",
        "basis.json"}},
      {Stage::kEigs, "eigs", {"generator.bin", "eigs.csv", "eigs_c.bin", "eigs_d.bin", "eigs.json"}},
      {Stage::kEvaluate, "evaluate", {"zeta_train.csv", "zeta_test.csv"}},
      {Stage::kAutocorr, "autocorr", {"autocorr.csv"}},
  };
  return table;
}

const StageInfo& info(Stage stage) {
  for (const auto& s : stage_table()) {
    if (s.stage == stage) return s;
  }
  throw Error(ErrorKind::kInvalidInput, "unknown stage");
}

std::vector<Stage> upstream(Stage stage) {
  switch (stage) {
    case Stage::kSimulate: return {};
    case Stage::kTune: return {Stage::kSimulate};
    case Stage::kBasis: return {Stage::kSimulate, Stage::kTune};
    case Stage::kEigs: return {Stage::kSimulate, Stage::kTune, Stage::kBasis};
    case Stage::kEvaluate:
      return {Stage::kSimulate, Stage::kTune, Stage::kBasis, Stage::kEigs};
    case Stage::kAutocorr: return {Stage::kEvaluate};
  }
  return {};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Exclusive marker so that two runs never write the same directory.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error(ErrorKind::kIo, "output directory is locked by another run (" +
                                      path_.string() + "); remove it if no run is active");
    }
  }
  ~DirectoryLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

class Runner {
 public:
  Runner(const PipelineConfig& config, const RunOptions& options)
      : config_(config), options_(options), dir_(config.output_dir) {}

  fs::path path(const std::string& name) const { return dir_ / name; }
  fs::path stamp_path(Stage s) const { return dir_ / "stages" / (std::string(info(s).name) + ".json"); }

  void log(const std::string& line) const {
    if (options_.log) options_.log(line);
  }

  std::string hash(const std::string& name) const { return io::sha256_file(path(name)); }

  // Stamp present and every listed output matches its recorded hash.
  bool intact(Stage s, json* stamp_out = nullptr) const {
    std::error_code ec;
    if (!fs::exists(stamp_path(s), ec)) return false;
    json stamp;
    try {
      stamp = json::parse(io::read_text(stamp_path(s)));
    } catch (const std::exception&) {
      return false;
    }
    for (const auto& name : info(s).outputs) {
      if (!stamp["outputs"].contains(name) || !fs::exists(path(name), ec)) return false;
      if (stamp["outputs"][name].get<std::string>() != hash(name)) return false;
    }
    if (stamp_out) *stamp_out = stamp;
    return true;
  }

  void require_upstream(Stage s) const {
    for (Stage up : upstream(s)) {
      if (!intact(up)) {
        throw Error(ErrorKind::kDependency,
                    std::string(info(s).name) + " needs the artifacts of '" + info(up).name +
                        "' in " + dir_.string() + "; run `koopgen " + info(up).name + "` first");
      }
    }
  }

  std::string key(Stage s) const {
    json k;
    k["version"] = version_string();
    k["stage"] = info(s).name;
    const auto& c = config_;
    switch (s) {
      case Stage::kSimulate:
        k["system"] = std::string(to_string(c.system));
        k["params"] = {c.alpha, c.sigma, c.rho, c.beta};
        k["N"] = c.N;
        k["dt"] = c.dt;
        k["spinup"] = c.spinup;
        k["substeps"] = c.resolved_substeps();
        k["seed"] = c.seed;
        k["test"] = {c.test_N, c.test_dt, c.test_seed, c.test_spinup(), c.resolved_test_substeps()};
        break;
      case Stage::kTune:
        k["kernel"] = {c.kernel.grid_points, c.kernel.grid_log2_min, c.kernel.grid_log2_max,
                       c.kernel.median_subsample, c.kernel.pilot_exponent};
        k["dataset"] = hash("dataset.csv");
        break;
      case Stage::kBasis:
        k["L"] = c.L;
        k["dataset"] = hash("dataset.csv");
        k["bandwidth"] = hash("bandwidth.json");
        break;
      case Stage::kEigs:
        k["L"] = c.L;
        k["z"] = c.z;
        k["tau"] = c.tau;
        k["dataset"] = hash("dataset.csv");
        k["dataset_meta"] = hash("dataset.json");
        k["bandwidth"] = hash("bandwidth.json");
        for (const auto& name : info(Stage::kBasis).outputs) k[name] = hash(name);
        break;
      case Stage::kEvaluate:
        k["select"] = c.selected_indices();
        k["test"] = hash("test_dataset.csv");
        k["eigs_d"] = hash("eigs_d.bin");
        k["eigs"] = hash("eigs.json");
        k["basis"] = hash("basis.json");
        k["basis_gamma"] = hash("basis_gamma.bin");
        k["basis_phi"] = hash("basis_phi.bin");
        break;
      case Stage::kAutocorr:
        k["select"] = c.selected_indices();
        k["max_lag_steps"] = c.max_lag_steps();
        k["test_dt"] = c.test_dt;
        k["zeta_test"] = hash("zeta_test.csv");
        break;
    }
    return io::sha256_hex(k.dump());
  }

  StageReport run(Stage s, std::vector<std::string>& warnings) {
    const auto& si = info(s);
    StageReport report;
    report.stage = s;
    if (options_.with_dependencies) {
      for (Stage up : upstream(s)) {
        if (!intact(up)) run(up, warnings);
      }
    }
    require_upstream(s);
    report.key = key(s);
    json stamp;
    if (config_.cache && intact(s, &stamp) && stamp["key"] == report.key) {
      report.cached = true;
      for (const auto& w : stamp["warnings"]) warnings.push_back(w.get<std::string>());
      log(std::string(si.name) + ": cached");
      return report;
    }
    const fs::path marker = path(std::string(si.name) + ".failed");
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> stage_warnings;
    try {
      execute(s, stage_warnings);
    } catch (const Error& e) {
      io::write_text(marker, std::string(to_string(e.kind())) + ": " + e.what() + "\n");
      throw Error(e.kind(), std::string("stage ") + si.name + ": " + e.what());
    } catch (const std::exception& e) {
      io::write_text(marker, std::string("error: ") + e.what() + "\n");
      throw Error(ErrorKind::kIo, std::string("stage ") + si.name + ": " + e.what());
    }
    std::error_code ec;
    fs::remove(marker, ec);
    report.seconds = seconds_since(start);
    json out;
    out["stage"] = si.name;
    out["key"] = report.key;
    out["outputs"] = json::object();
    for (const auto& name : si.outputs) out["outputs"][name] = hash(name);
    out["warnings"] = stage_warnings;
    fs::create_directories(dir_ / "stages");
    io::write_text(stamp_path(s), out.dump(2) + "\n");
    for (auto& w : stage_warnings) warnings.push_back(std::move(w));
    log(std::string(si.name) + ": done in " + io::format_double(std::round(report.seconds * 100) / 100) + " s");
    return report;
  }

 private:
  VariableBandwidthKernel load_kernel(const TrajectoryDataset& data) const {
    const auto j = json::parse(io::read_text(path("bandwidth.json")));
    BandwidthModel model;
    model.epsilon = j.at("epsilon").get<double>();
    model.pilot_epsilon = j.at("pilot_epsilon").get<double>();
    model.pilot_exponent = j.at("pilot_exponent").get<double>();
    return VariableBandwidthKernel(data.embedded, std::move(model));
  }

  KernelBasis load_basis() const {
    KernelBasis b;
    b.d = io::read_matrix(path("basis_d.bin")).col(0);
    b.q = io::read_matrix(path("basis_q.bin")).col(0);
    b.lambda = io::read_matrix(path("basis_lambda.bin")).col(0);
    b.sigma = b.lambda.cwiseSqrt();
    b.phi = io::read_matrix(path("basis_phi.bin"));
    b.gamma = io::read_matrix(path("basis_gamma.bin"));
    return b;
  }

  void execute(Stage s, std::vector<std::string>& warnings) {
    fs::create_directories(dir_);
    switch (s) {
      case Stage::kSimulate: return simulate();
      case Stage::kTune: return tune(warnings);
      case Stage::kBasis: return basis();
      case Stage::kEigs: return eigs(warnings);
      case Stage::kEvaluate: return evaluate();
      case Stage::kAutocorr: return autocorr();
    }
  }

  void simulate() {
    const auto& c = config_;
    const FlowSystem system = c.flow_system();
    const Vec x0 = random_initial_state(system, c.seed);
    const auto train = generate_dataset(system, x0, c.N, c.dt, c.spinup, c.resolved_substeps());
    write_dataset(path("dataset.csv"), train, {system, c.N, c.dt, c.spinup, c.seed});
    const Vec x0_test = random_initial_state(system, c.test_seed);
    const auto test = generate_dataset(system, x0_test, c.test_N, c.test_dt, c.test_spinup(),
                                       c.resolved_test_substeps());
    write_dataset(path("test_dataset.csv"), test,
                  {system, c.test_N, c.test_dt, c.test_spinup(), c.test_seed});
  }

  void tune(std::vector<std::string>& warnings) {
    const auto data = read_dataset(path("dataset.csv"));
    const auto kernel = VariableBandwidthKernel::fit(data.embedded, config_.kernel);
    const auto& m = kernel.model();
    io::write_text(path("bandwidth.csv"), tuning_curve_csv(m.tuning_curve));
    json j;
    j["epsilon"] = m.epsilon;
    j["pilot_epsilon"] = m.pilot_epsilon;
    j["pilot_exponent"] = m.pilot_exponent;
    j["log_rho_scale"] = m.log_rho_scale;
    j["rho_min"] = m.rho_train.minCoeff();
    j["rho_max"] = m.rho_train.maxCoeff();
    json pilot = json::array();
    for (const auto& p : m.pilot_curve) pilot.push_back({p.log_eps, p.log_s, p.slope});
    j["pilot_curve"] = pilot;
    j["warnings"] = m.warnings;
    io::write_text(path("bandwidth.json"), j.dump(2) + "\n");
    warnings.insert(warnings.end(), m.warnings.begin(), m.warnings.end());
  }

  void basis() {
    const auto data = read_dataset(path("dataset.csv"));
    const auto kernel = load_kernel(data);
    KernelBasis b;
    {
      const Normalization norm = normalize_bistochastic(kernel.matrix());
      b = compute_basis(norm, config_.L);
    }
    io::write_matrix(path("basis_d.bin"), b.d);
    io::write_matrix(path("basis_q.bin"), b.q);
    io::write_matrix(path("basis_lambda.bin"), b.lambda);
    io::write_matrix(path("basis_phi.bin"), b.phi);
    io::write_matrix(path("basis_gamma.bin"), b.gamma);
    json j;
    j["epsilon"] = kernel.model().epsilon;
    j["pilot_epsilon"] = kernel.model().pilot_epsilon;
    j["pilot_exponent"] = kernel.model().pilot_exponent;
    j["N"] = b.size();
    j["L_retained"] = b.retained();
    j["dataset_sha256"] = hash("dataset.csv");
    j["lambda_1"] = b.lambda[1];
    j["lambda_last"] = b.lambda[b.retained() - 1];
    io::write_text(path("basis.json"), j.dump(2) + "\n");
  }

  void eigs(std::vector<std::string>& warnings) {
    DatasetManifest meta;
    const auto data = read_dataset(path("dataset.csv"), &meta);
    const auto kernel = load_kernel(data);
    const auto b = load_basis();
    const Index l = config_.L;
    if (b.retained() < l + 1) {
      throw Error(ErrorKind::kDependency,
                  "basis retains " + std::to_string(b.retained() - 1) +
                      " nonconstant functions but L = " + std::to_string(l) +
                      "; rerun `koopgen basis`");
    }
    const Mat V = assemble_generator(data, meta.system, b, kernel, l);
    const auto problem = build_problem(V, b, config_.z, config_.tau);
    const auto gevp = solve_gevp(problem.A, problem.B);
    const Vec lambda = b.lambda.segment(1, l);
    const auto sol = finalize_solution(gevp, V, config_.z, lambda);

    io::write_matrix(path("generator.bin"), V);
    io::write_cmatrix(path("eigs_c.bin"), sol.c);
    io::write_cmatrix(path("eigs_d.bin"), sol.dcoef);
    io::write_text(path("eigs.csv"), eigs_csv(sol));
    if (config_.dump_matrices) {
      io::write_matrix_csv(path("V.csv"), problem.V);
      io::write_matrix_csv(path("A.csv"), problem.A);
      io::write_matrix_csv(path("B.csv"), problem.B);
    }

    double residual = 0.0;
    const double norm_a = problem.A.norm(), norm_b = problem.B.norm();
    for (Index j = 0; j < l; ++j) {
      const CVec r = problem.A.cast<Complex>() * sol.c.col(j) -
                     sol.beta[j] * (problem.B.cast<Complex>() * sol.c.col(j));
      residual = std::max(residual, r.norm() / ((norm_a + std::abs(sol.beta[j]) * norm_b) *
                                                sol.c.col(j).norm()));
    }
    const double ortho =
        (sol.dcoef.adjoint() * sol.dcoef - CMat::Identity(l, l)).cwiseAbs().maxCoeff();
    json j;
    j["L"] = l;
    j["z"] = config_.z;
    j["tau"] = config_.tau;
    j["antisymmetry_residual"] = (V + V.transpose()).norm() / V.norm();
    j["reduced_antisymmetry"] = gevp.reduced_antisymmetry;
    j["max_gevp_residual"] = residual;
    j["zeta_orthonormality_error"] = ortho;
    j["clamped_modes"] = sol.clamped_modes;
    j["warnings"] = sol.warnings;
    io::write_text(path("eigs.json"), j.dump(2) + "\n");
    warnings.insert(warnings.end(), sol.warnings.begin(), sol.warnings.end());
  }

  std::vector<Index> checked_selection(Index available) const {
    auto js = config_.selected_indices();
    for (Index j : js) {
      if (j >= available) {
        throw Error(ErrorKind::kValidation,
                    "selected mode " + std::to_string(j + 1) + " exceeds L = " +
                        std::to_string(available));
      }
    }
    return js;
  }

  void evaluate() {
    const auto data = read_dataset(path("dataset.csv"));
    const auto test = read_dataset(path("test_dataset.csv"));
    const auto b = load_basis();
    EigenSolution sol;
    sol.dcoef = io::read_cmatrix(path("eigs_d.bin"));
    const Index l = sol.dcoef.rows();
    const auto js = checked_selection(sol.dcoef.cols());

    std::vector<EigenTimeSeries> train_series;
    Vec times(data.size());
    for (Index n = 0; n < data.size(); ++n) times[n] = static_cast<double>(n) * data.dt;
    const CMat in_sample = b.phi.middleCols(1, l).cast<Complex>() * sol.dcoef;
    for (Index j : js) train_series.push_back({j, times, in_sample.col(j)});
    io::write_text(path("zeta_train.csv"), timeseries_csv(train_series));

    const Evaluator evaluator(load_kernel(data), b, sol);
    io::write_text(path("zeta_test.csv"),
                   timeseries_csv(reconstruct_timeseries(evaluator, test, js)));
  }

  void autocorr() {
    const auto table = io::read_csv(path("zeta_test.csv"));
    const auto js = config_.selected_indices();
    auto column = [&](const std::string& name) -> Index {
      for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (table.header[i] == name) return static_cast<Index>(i);
      }
      return -1;
    };
    const Index lags = config_.max_lag_steps();
    std::vector<CVec> correlations;
    for (Index j : js) {
      const std::string s = std::to_string(j + 1);
      const Index re = column("re_" + s), im = column("im_" + s);
      if (re < 0 || im < 0) {
        throw Error(ErrorKind::kDependency, "zeta_test.csv has no column for mode " + s +
                                                "; rerun `koopgen evaluate` with this selection");
      }
      CVec series(static_cast<Index>(table.rows.size()));
      for (std::size_t n = 0; n < table.rows.size(); ++n) {
        series[static_cast<Index>(n)] =
            Complex(table.rows[n][static_cast<std::size_t>(re)], table.rows[n][static_cast<std::size_t>(im)]);
      }
      correlations.push_back(autocorrelation(series, lags - 1));
    }
    io::write_text(path("autocorr.csv"), autocorr_csv(config_.test_dt, js, correlations));
  }

  const PipelineConfig& config_;
  const RunOptions& options_;
  fs::path dir_;
};

void write_manifest(const PipelineConfig& config, RunManifest& manifest) {
  const fs::path dir(config.output_dir);
  manifest.files.clear();
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json" || rel == ".lock" || rel.ends_with(".tmp")) continue;
    manifest.files[rel] = io::sha256_file(entry.path());
  }
  json j;
  j["version"] = version_string();
  j["config"] = manifest.config_text;
  json stages = json::array();
  for (const auto& s : manifest.stages) {
    stages.push_back({{"stage", std::string(to_string(s.stage))},
                      {"key", s.key},
                      {"cached", s.cached},
                      {"seconds", s.seconds}});
  }
  j["stages"] = stages;
  j["warnings"] = manifest.warnings;
  j["files"] = manifest.files;
  io::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace

std::string_view to_string(Stage stage) { return info(stage).name; }

Stage parse_stage(std::string_view name) {
  for (const auto& s : stage_table()) {
    if (name == s.name) return s.stage;
  }
  throw Error(ErrorKind::kValidation, "unknown stage '" + std::string(name) + "'");
}

std::vector<Stage> all_stages() {
  std::vector<Stage> out;
  for (const auto& s : stage_table()) out.push_back(s.stage);
  return out;
}

std::string version_string() { return KOOPGEN_VERSION; }

RunManifest run_pipeline(const PipelineConfig& config, const std::vector<Stage>& stages,
                         const RunOptions& options) {
  validate(config);
  fs::create_directories(config.output_dir);
  DirectoryLock lock(config.output_dir);
  RunManifest manifest;
  manifest.config_text = serialize_config(config);
  Runner runner(config, options);
  try {
    for (Stage s : stages) manifest.stages.push_back(runner.run(s, manifest.warnings));
  } catch (...) {
    write_manifest(config, manifest);
    throw;
  }
  write_manifest(config, manifest);
  return manifest;
}

std::string describe_plan(const PipelineConfig& config, const std::vector<Stage>& stages) {
  validate(config);
  std::string text = "output_dir: " + config.output_dir + "\n";
  text += "system: " + std::string(to_string(config.system)) + "  N=" + std::to_string(config.N) +
          "  dt=" + io::format_double(config.dt) + "  spinup=" + std::to_string(config.spinup) +
          "  substeps=" + std::to_string(config.resolved_substeps()) + "\n";
  text += "basis: L=" + std::to_string(config.L) + "  z=" + io::format_double(config.z) +
          "  tau=" + io::format_double(config.tau) + "\n";
  text += "test: N=" + std::to_string(config.test_N) + "  dt=" + io::format_double(config.test_dt) +
          "  spinup=" + std::to_string(config.test_spinup()) +
          "  lags=" + std::to_string(config.max_lag_steps()) + "\n";
  RunOptions quiet;
  Runner runner(config, quiet);
  bool upstream_pending = false;
  for (Stage s : stages) {
    std::string status;
    if (upstream_pending) {
      status = "run (after upstream)";
    } else {
      bool missing = false;
      for (Stage up : upstream(s)) {
        if (std::find(stages.begin(), stages.end(), up) == stages.end() && !runner.intact(up)) {
          missing = true;
        }
      }
      if (missing) {
        status = "blocked: missing upstream artifacts";
      } else {
        json stamp;
        bool ready = true;
        for (Stage up : upstream(s)) ready = ready && runner.intact(up);
        if (ready && config.cache && runner.intact(s, &stamp) && stamp["key"] == runner.key(s)) {
          status = "cached";
        } else {
          status = "run";
          upstream_pending = true;
        }
      }
    }
    text += "  " + std::string(to_string(s)) + ": " + status + "\n";
  }
  return text;
}

}  // namespace koopgen
