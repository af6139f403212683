#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "koopgen/types.hpp"

namespace koopgen {

enum class SystemKind { kTorusRotation, kStepanoff, kLorenz63 };

std::string_view to_string(SystemKind kind);
SystemKind parse_system_kind(std::string_view name);

// A named flow together with its observation map into data space.
//
// Torus systems live on [0, 2pi)^2 and embed into R^4 through the flat
// embedding (cos x1, sin x1, cos x2, sin x2). Lorenz 63 is observed through
// the identity map.
struct FlowSystem {
  SystemKind kind = SystemKind::kTorusRotation;
  double alpha = 0.0;  // torus rotation / Stepanoff frequency parameter
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  // Lorenz divergence guard: integration fails once any |x_i| exceeds it.
  double escape_radius = 1.0e4;

  static FlowSystem torus_rotation(double alpha = default_alpha());
  static FlowSystem stepanoff(double alpha = default_alpha());
  static FlowSystem lorenz63(double sigma = 10.0, double rho = 28.0,
                             double beta = 8.0 / 3.0);
  static FlowSystem make(SystemKind kind);

  // sqrt(30), the rotation frequency with 2pi/alpha ~ 1.15.
  static double default_alpha();

  int state_dim() const { return kind == SystemKind::kLorenz63 ? 3 : 2; }
  int data_dim() const { return kind == SystemKind::kLorenz63 ? 3 : 4; }
  bool on_torus() const { return kind != SystemKind::kLorenz63; }
};

// Wraps an angle into [0, 2pi).
double wrap_angle(double x);

Vec vector_field(const FlowSystem& system, const VecRef& x);
// Analytic Jacobian dV/dx (row i = gradient of V^i).
Mat vector_field_jacobian(const FlowSystem& system, const VecRef& x);

Vec exact_flow_torus(double alpha, const VecRef& x, double t);
// Throws kUnsupported for anything other than the torus rotation.
Vec exact_flow(const FlowSystem& system, const VecRef& x, double t);

// One classical RK4 step of signed size h; torus states are wrapped.
Vec rk4_step(const FlowSystem& system, const VecRef& x, double h);
Vec integrate_rk4(const FlowSystem& system, const VecRef& x0, double dt_step,
                  std::int64_t n_steps);

// Advances x by signed time t: exact flow for the torus rotation, otherwise
// `substeps` RK4 steps of size t / substeps.
Vec advance(const FlowSystem& system, const VecRef& x, double t, int substeps);

// Smallest substep count keeping the internal RK4 step <= max_step.
int auto_substeps(double dt, double max_step = 0.01);

Vec embed(const FlowSystem& system, const VecRef& x);
Vec pushforward_vector(const FlowSystem& system, const VecRef& x);

struct TrajectoryDataset {
  PointSet states;    // N x state_dim
  PointSet embedded;  // N x data_dim, row n = embed(states row n)
  double dt = 0.0;
  std::int64_t spinup_discarded = 0;

  Index size() const { return states.rows(); }
};

TrajectoryDataset generate_dataset(const FlowSystem& system, const VecRef& x0,
                                   Index n_samples, double dt,
                                   std::int64_t spinup, int substeps);

// Pushforward vectors dF(V) at every state of the dataset, N x data_dim.
PointSet pushforward_vectors(const FlowSystem& system,
                             const TrajectoryDataset& data);

// Seeded initial condition: uniform on the torus, or a perturbation of
// (1, 1, 1) for Lorenz 63.
Vec random_initial_state(const FlowSystem& system, std::uint64_t seed);

struct DatasetManifest {
  FlowSystem system;
  Index n_samples = 0;
  double dt = 0.0;
  std::int64_t spinup = 0;
  std::uint64_t seed = 0;
};

// CSV with header `t,x1..xs,y1..yd` plus a JSON sidecar manifest.
void write_dataset(const std::filesystem::path& csv_path,
                   const TrajectoryDataset& data,
                   const DatasetManifest& manifest);
TrajectoryDataset read_dataset(const std::filesystem::path& csv_path,
                               DatasetManifest* manifest = nullptr);

}  // namespace koopgen
