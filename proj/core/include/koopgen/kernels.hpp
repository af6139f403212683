#pragma once

#include <span>
#include <string>
#include <vector>

#include "koopgen/types.hpp"

namespace koopgen {

struct KernelConfig {
  // Candidate eps^2 values form a geometric grid of `grid_points` between
  // 2^grid_log2_min and 2^grid_log2_max times the median squared pairwise
  // distance of the data.
  int grid_points = 64;
  double grid_log2_min = -20.0;
  double grid_log2_max = 20.0;
  Index median_subsample = 2000;
  // rho = density^pilot_exponent, so a negative exponent widens the kernel
  // where samples are sparse.
  double pilot_exponent = -0.5;

  bool operator==(const KernelConfig&) const = default;
};

struct TuningPoint {
  double log_eps = 0.0;
  double log_s = 0.0;
  double slope = 0.0;  // d log S / d log eps
};

struct TuningResult {
  double epsilon = 0.0;
  std::vector<TuningPoint> curve;
  bool at_boundary = false;
};

// Gaussian sum (1/N) sum_n exp(-|y_m - y_n|^2 / pilot_epsilon^2) at every
// sample, floored at density_floor(N).
Vec pilot_density(const PointSet& points, double pilot_epsilon);
double density_floor(Index n_samples);

// density^exponent rescaled to unit geometric mean.
Vec bandwidth_function(const Vec& density, double exponent);

// Throws kDegenerateData when all samples coincide.
std::vector<double> default_tuning_grid(const PointSet& points,
                                        const KernelConfig& config);

// Picks eps where d log S / d log eps is largest over the grid, with
// S(eps) = (1/N^2) sum_{m,n} k_eps(y_m, y_n). `eps2_grid` holds eps^2
// values and must be strictly increasing with at least 16 entries.
TuningResult tune_epsilon(const PointSet& points, const Vec& rho,
                          std::span<const double> eps2_grid);

// exp(-|y - y'|^2 / (eps^2 rho(y) rho(y'))).
double kernel_eval(const VecRef& y, const VecRef& y2, double epsilon,
                   double rho_y, double rho_y2);

// w . grad_y of kernel_eval, including the dependence of rho(y) on y.
double kernel_dir_derivative(const VecRef& y, const VecRef& y2, const VecRef& w,
                             double epsilon, double rho_y, double rho_y2,
                             const VecRef& grad_rho_y);

struct BandwidthModel {
  double epsilon = 0.0;
  double pilot_epsilon = 0.0;
  double pilot_exponent = -0.5;
  // Mean of pilot_exponent * log(density) over the training samples; rho at
  // any point is density^pilot_exponent / exp(log_rho_scale).
  double log_rho_scale = 0.0;
  Vec rho_train;
  std::vector<TuningPoint> tuning_curve;
  std::vector<TuningPoint> pilot_curve;
  std::vector<std::string> warnings;
};

struct PointBandwidth {
  double density = 0.0;
  double rho = 0.0;
  Vec grad_rho;
};

// Variable-bandwidth Gaussian kernel bound to a training set. The bandwidth
// function is an everywhere-defined function of the query point, so the same
// code path serves training and out-of-sample evaluation.
class VariableBandwidthKernel {
 public:
  VariableBandwidthKernel(PointSet train, BandwidthModel model);

  // Pilot bandwidth and eps are both chosen by tune_epsilon.
  static VariableBandwidthKernel fit(const PointSet& train,
                                     const KernelConfig& config = {});

  const PointSet& points() const { return train_; }
  const BandwidthModel& model() const { return model_; }
  double epsilon() const { return model_.epsilon; }
  Index size() const { return train_.rows(); }
  Index dim() const { return train_.cols(); }

  PointBandwidth bandwidth_at(const VecRef& y) const;
  const PointSet& grad_rho_train() const { return grad_rho_train_; }

  // Kernel sections k(y, y_n) for every training sample n.
  void row(const VecRef& y, double rho_y, std::span<double> k_out) const;
  // Kernel sections and their derivatives along w at y.
  void row_with_derivative(const VecRef& y, const PointBandwidth& bw,
                           const VecRef& w, std::span<double> k_out,
                           std::span<double> dk_out) const;

  // N x N symmetric training kernel matrix.
  Mat matrix() const;

 private:
  PointSet train_;
  BandwidthModel model_;
  PointSet grad_rho_train_;
};

// Writes `log_eps,log_S,slope`.
std::string tuning_curve_csv(const std::vector<TuningPoint>& curve);

}  // namespace koopgen
