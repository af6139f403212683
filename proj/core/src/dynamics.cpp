#include "koopgen/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "koopgen/error.hpp"
#include "koopgen/io.hpp"

namespace koopgen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite(const VecRef& x, const char* what) {
  if (!x.allFinite()) {
    throw Error(ErrorKind::kInvalidInput, std::string(what) + ": non-finite state");
  }
}

void require_dim(const FlowSystem& system, const VecRef& x) {
  if (x.size() != system.state_dim()) {
    throw Error(ErrorKind::kInvalidInput, "state dimension mismatch");
  }
}

Vec wrap_state(const FlowSystem& system, Vec x) {
  if (system.on_torus()) {
    for (Index i = 0; i < x.size(); ++i) x[i] = wrap_angle(x[i]);
  }
  return x;
}

void check_escape(const FlowSystem& system, const Vec& x) {
  if (!x.allFinite() ||
      (!system.on_torus() && x.cwiseAbs().maxCoeff() > system.escape_radius)) {
    throw Error(ErrorKind::kDivergence,
                "trajectory left the bounding box of radius " +
                    io::format_double(system.escape_radius));
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::kTorusRotation: return "torus";
    case SystemKind::kStepanoff: return "stepanoff";
    case SystemKind::kLorenz63: return "lorenz63";
  }
  return "unknown";
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "torus" || name == "torus_rotation") return SystemKind::kTorusRotation;
  if (name == "stepanoff") return SystemKind::kStepanoff;
  if (name == "lorenz63" || name == "l63") return SystemKind::kLorenz63;
  throw Error(ErrorKind::kValidation, "unknown system '" + std::string(name) + "'");
}

double FlowSystem::default_alpha() { return std::sqrt(30.0); }

FlowSystem FlowSystem::torus_rotation(double alpha) {
  FlowSystem s;
  s.kind = SystemKind::kTorusRotation;
  s.alpha = alpha;
  return s;
}

FlowSystem FlowSystem::stepanoff(double alpha) {
  FlowSystem s;
  s.kind = SystemKind::kStepanoff;
  s.alpha = alpha;
  return s;
}

FlowSystem FlowSystem::lorenz63(double sigma, double rho, double beta) {
  FlowSystem s;
  s.kind = SystemKind::kLorenz63;
  s.sigma = sigma;
  s.rho = rho;
  s.beta = beta;
  return s;
}

FlowSystem FlowSystem::make(SystemKind kind) {
  switch (kind) {
    case SystemKind::kTorusRotation: return torus_rotation();
    case SystemKind::kStepanoff: return stepanoff();
    case SystemKind::kLorenz63: return lorenz63();
  }
  return torus_rotation();
}

double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2pi.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

Vec vector_field(const FlowSystem& system, const VecRef& x) {
  require_dim(system, x);
  require_finite(x, "vector_field");
  Vec v(system.state_dim());
  switch (system.kind) {
    case SystemKind::kTorusRotation:
      v << 1.0, system.alpha;
      break;
    case SystemKind::kStepanoff: {
      const double a = system.alpha;
      const double v2 = a * (1.0 - std::cos(x[0] - x[1]));
      v << v2 + (1.0 - a) * (1.0 - std::cos(x[1])), v2;
      break;
    }
    case SystemKind::kLorenz63:
      v << system.sigma * (x[1] - x[0]), x[0] * (system.rho - x[2]) - x[1],
          x[0] * x[1] - system.beta * x[2];
      break;
  }
  return v;
}

Mat vector_field_jacobian(const FlowSystem& system, const VecRef& x) {
  require_dim(system, x);
  require_finite(x, "vector_field_jacobian");
  const int n = system.state_dim();
  Mat j = Mat::Zero(n, n);
  switch (system.kind) {
    case SystemKind::kTorusRotation:
      break;
    case SystemKind::kStepanoff: {
      const double a = system.alpha;
      const double s = a * std::sin(x[0] - x[1]);
      j << s, -s + (1.0 - a) * std::sin(x[1]), s, -s;
      break;
    }
    case SystemKind::kLorenz63:
      j << -system.sigma, system.sigma, 0.0, system.rho - x[2], -1.0, -x[0],
          x[1], x[0], -system.beta;
      break;
  }
  return j;
}

Vec exact_flow_torus(double alpha, const VecRef& x, double t) {
  if (x.size() != 2) throw Error(ErrorKind::kInvalidInput, "torus state must be 2-d");
  require_finite(x, "exact_flow_torus");
  Vec y(2);
  y << wrap_angle(x[0] + t), wrap_angle(x[1] + alpha * t);
  return y;
}

Vec exact_flow(const FlowSystem& system, const VecRef& x, double t) {
  if (system.kind != SystemKind::kTorusRotation) {
    throw Error(ErrorKind::kUnsupported,
                "exact flow is only available for the torus rotation");
  }
  return exact_flow_torus(system.alpha, x, t);
}

Vec rk4_step(const FlowSystem& system, const VecRef& x, double h) {
  const Vec x0 = x;
  const Vec k1 = vector_field(system, x0);
  const Vec k2 = vector_field(system, x0 + 0.5 * h * k1);
  const Vec k3 = vector_field(system, x0 + 0.5 * h * k2);
  const Vec k4 = vector_field(system, x0 + h * k3);
  return wrap_state(system, x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Vec integrate_rk4(const FlowSystem& system, const VecRef& x0, double dt_step,
                  std::int64_t n_steps) {
  if (!(dt_step > 0.0) || n_steps < 0) {
    throw Error(ErrorKind::kInvalidInput, "integrate_rk4 requires dt_step > 0");
  }
  require_dim(system, x0);
  require_finite(x0, "integrate_rk4");
  Vec x = wrap_state(system, x0);
  for (std::int64_t i = 0; i < n_steps; ++i) {
    x = rk4_step(system, x, dt_step);
    check_escape(system, x);
  }
  return x;
}

Vec advance(const FlowSystem& system, const VecRef& x, double t, int substeps) {
  if (system.kind == SystemKind::kTorusRotation) {
    return exact_flow_torus(system.alpha, x, t);
  }
  if (substeps < 1) throw Error(ErrorKind::kInvalidInput, "substeps must be >= 1");
  require_dim(system, x);
  require_finite(x, "advance");
  const double h = t / substeps;
  Vec y = wrap_state(system, x);
  for (int i = 0; i < substeps; ++i) {
    y = rk4_step(system, y, h);
    check_escape(system, y);
  }
  return y;
}

int auto_substeps(double dt, double max_step) {
  return std::max(1, static_cast<int>(std::ceil(dt / max_step - 1e-12)));
}

Vec embed(const FlowSystem& system, const VecRef& x) {
  require_dim(system, x);
  require_finite(x, "embed");
  if (!system.on_torus()) return x;
  Vec y(4);
  y << std::cos(x[0]), std::sin(x[0]), std::cos(x[1]), std::sin(x[1]);
  return y;
}

Vec pushforward_vector(const FlowSystem& system, const VecRef& x) {
  const Vec v = vector_field(system, x);
  if (!system.on_torus()) return v;
  Vec w(4);
  w << -std::sin(x[0]) * v[0], std::cos(x[0]) * v[0], -std::sin(x[1]) * v[1],
      std::cos(x[1]) * v[1];
  return w;
}

TrajectoryDataset generate_dataset(const FlowSystem& system, const VecRef& x0,
                                   Index n_samples, double dt,
                                   std::int64_t spinup, int substeps) {
  if (n_samples < 2) throw Error(ErrorKind::kInvalidInput, "need N >= 2 samples");
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidInput, "need dt > 0");
  if (substeps < 1) throw Error(ErrorKind::kInvalidInput, "substeps must be >= 1");
  if (spinup < 0) throw Error(ErrorKind::kInvalidInput, "spinup must be >= 0");
  require_dim(system, x0);
  require_finite(x0, "generate_dataset");

  TrajectoryDataset data;
  data.dt = dt;
  data.spinup_discarded = spinup;
  data.states.resize(n_samples, system.state_dim());
  data.embedded.resize(n_samples, system.data_dim());

  if (system.kind == SystemKind::kTorusRotation) {
    // Closed-form flow from x0 avoids accumulating rounding over long runs.
    for (Index n = 0; n < n_samples; ++n) {
      const double t = static_cast<double>(spinup + n) * dt;
      data.states.row(n) = exact_flow_torus(system.alpha, x0, t).transpose();
    }
  } else {
    Vec x = wrap_state(system, x0);
    for (std::int64_t s = 0; s < spinup; ++s) x = advance(system, x, dt, substeps);
    for (Index n = 0; n < n_samples; ++n) {
      if (n > 0) x = advance(system, x, dt, substeps);
      data.states.row(n) = x.transpose();
    }
  }
  for (Index n = 0; n < n_samples; ++n) {
    data.embedded.row(n) = embed(system, data.states.row(n).transpose()).transpose();
  }
  return data;
}

PointSet pushforward_vectors(const FlowSystem& system,
                             const TrajectoryDataset& data) {
  PointSet w(data.size(), system.data_dim());
  for (Index n = 0; n < data.size(); ++n) {
    w.row(n) = pushforward_vector(system, data.states.row(n).transpose()).transpose();
  }
  return w;
}

Vec random_initial_state(const FlowSystem& system, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vec x(system.state_dim());
  if (system.on_torus()) {
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (Index i = 0; i < x.size(); ++i) x[i] = u(rng);
  } else {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Index i = 0; i < x.size(); ++i) x[i] = 1.0 + u(rng);
  }
  return x;
}

void write_dataset(const std::filesystem::path& csv_path,
                   const TrajectoryDataset& data,
                   const DatasetManifest& manifest) {
  std::string text = "t";
  for (Index i = 0; i < data.states.cols(); ++i) text += ",x" + std::to_string(i + 1);
  for (Index i = 0; i < data.embedded.cols(); ++i) text += ",y" + std::to_string(i + 1);
  text += '\n';
  for (Index n = 0; n < data.size(); ++n) {
    text += io::format_double(static_cast<double>(n) * data.dt);
    for (Index i = 0; i < data.states.cols(); ++i) {
      text += ',';
      text += io::format_double(data.states(n, i));
    }
    for (Index i = 0; i < data.embedded.cols(); ++i) {
      text += ',';
      text += io::format_double(data.embedded(n, i));
    }
    text += '\n';
  }
  io::write_text(csv_path, text);

  const auto& s = manifest.system;
  nlohmann::ordered_json j;
  j["system"] = std::string(to_string(s.kind));
  j["params"] = {{"alpha", s.alpha}, {"sigma", s.sigma}, {"rho", s.rho}, {"beta", s.beta}};
  j["N"] = manifest.n_samples;
  j["dt"] = manifest.dt;
  j["spinup"] = manifest.spinup;
  j["seed"] = manifest.seed;
  io::write_text(sidecar_path(csv_path), j.dump(2) + "\n");
}

TrajectoryDataset read_dataset(const std::filesystem::path& csv_path,
                               DatasetManifest* manifest) {
  const auto meta_text = io::read_text(sidecar_path(csv_path));
  const auto j = nlohmann::json::parse(meta_text);
  DatasetManifest m;
  m.system.kind = parse_system_kind(j.at("system").get<std::string>());
  m.system.alpha = j.at("params").at("alpha").get<double>();
  m.system.sigma = j.at("params").at("sigma").get<double>();
  m.system.rho = j.at("params").at("rho").get<double>();
  m.system.beta = j.at("params").at("beta").get<double>();
  m.n_samples = j.at("N").get<Index>();
  m.dt = j.at("dt").get<double>();
  m.spinup = j.at("spinup").get<std::int64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();

  const auto table = io::read_csv(csv_path);
  const Index s = m.system.state_dim();
  const Index d = m.system.data_dim();
  if (static_cast<Index>(table.header.size()) != 1 + s + d ||
      static_cast<Index>(table.rows.size()) != m.n_samples) {
    throw Error(ErrorKind::kIo, "dataset csv does not match its manifest: " +
                                    csv_path.string());
  }
  TrajectoryDataset data;
  data.dt = m.dt;
  data.spinup_discarded = m.spinup;
  data.states.resize(m.n_samples, s);
  data.embedded.resize(m.n_samples, d);
  for (Index n = 0; n < m.n_samples; ++n) {
    const auto& row = table.rows[static_cast<std::size_t>(n)];
    for (Index i = 0; i < s; ++i) data.states(n, i) = row[static_cast<std::size_t>(1 + i)];
    for (Index i = 0; i < d; ++i) data.embedded(n, i) = row[static_cast<std::size_t>(1 + s + i)];
  }
  if (manifest) *manifest = m;
  return data;
}

}  // namespace koopgen
