#include "koopgen/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "koopgen/error.hpp"
#include "koopgen/io.hpp"

namespace koopgen {

namespace {

// exp(-x) is exactly zero in double precision beyond this.
constexpr double kExpCutoff = 746.0;

inline double sq_dist(const double* a, const double* b, Index d) {
  double s = 0.0;
  for (Index i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

// Raw Gaussian sum at y and, optionally, its gradient.
double density_sum(const PointSet& points, const double* y, double pilot_eps,
                   double* grad) {
  const Index n = points.rows();
  const Index d = points.cols();
  const double inv = 1.0 / (pilot_eps * pilot_eps);
  double sum = 0.0;
  if (grad) std::fill(grad, grad + d, 0.0);
  for (Index j = 0; j < n; ++j) {
    const double* p = points.row(j).data();
    const double e = std::exp(-sq_dist(y, p, d) * inv);
    sum += e;
    if (grad) {
      for (Index i = 0; i < d; ++i) grad[i] += e * (y[i] - p[i]);
    }
  }
  const double scale = 1.0 / static_cast<double>(n);
  if (grad) {
    for (Index i = 0; i < d; ++i) grad[i] *= -2.0 * inv * scale;
  }
  return sum * scale;
}

void validate_grid(std::span<const double> grid) {
  if (grid.size() < 16) {
    throw Error(ErrorKind::kInvalidInput, "tuning grid needs at least 16 points");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw Error(ErrorKind::kInvalidInput,
                  "tuning grid must be positive and strictly increasing");
    }
  }
}

}  // namespace

double density_floor(Index n_samples) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(n_samples);
}

Vec pilot_density(const PointSet& points, double pilot_epsilon) {
  if (!(pilot_epsilon > 0.0)) {
    throw Error(ErrorKind::kInvalidInput, "pilot_epsilon must be positive");
  }
  const Index n = points.rows();
  const double floor = density_floor(n);
  Vec out(n);
#pragma omp parallel for schedule(static)
  for (Index m = 0; m < n; ++m) {
    out[m] = std::max(floor, density_sum(points, points.row(m).data(),
                                         pilot_epsilon, nullptr));
  }
  return out;
}

Vec bandwidth_function(const Vec& density, double exponent) {
  if (density.size() == 0 || (density.array() <= 0.0).any()) {
    throw Error(ErrorKind::kInvalidInput, "density values must be positive");
  }
  const Vec log_raw = exponent * density.array().log();
  const double log_scale = log_raw.mean();
  return (log_raw.array() - log_scale).exp();
}

std::vector<double> default_tuning_grid(const PointSet& points,
                                        const KernelConfig& config) {
  const Index n = points.rows();
  if (n < 2) throw Error(ErrorKind::kDegenerateData, "need at least two samples");
  const Index m = std::min(n, std::max<Index>(2, config.median_subsample));
  // Deterministic evenly strided subsample.
  std::vector<Index> idx(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i * n / m;
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Index a = 0; a < m; ++a) {
    for (Index b = a + 1; b < m; ++b) {
      d2.push_back(sq_dist(points.row(idx[a]).data(), points.row(idx[b]).data(),
                           points.cols()));
    }
  }
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  double reference = *mid;
  if (!(reference > 0.0)) {
    // A zero median may still hide distinct points; fall back to the mean.
    double mean = 0.0;
    for (double v : d2) mean += v;
    reference = mean / static_cast<double>(d2.size());
    if (!(reference > 0.0)) {
      throw Error(ErrorKind::kDegenerateData, "all samples are identical");
    }
  }
  if (config.grid_points < 16 || !(config.grid_log2_max > config.grid_log2_min)) {
    throw Error(ErrorKind::kInvalidInput, "invalid tuning grid configuration");
  }
  std::vector<double> grid(static_cast<std::size_t>(config.grid_points));
  const double step = (config.grid_log2_max - config.grid_log2_min) /
                      static_cast<double>(config.grid_points - 1);
  for (int g = 0; g < config.grid_points; ++g) {
    grid[static_cast<std::size_t>(g)] =
        reference * std::exp2(config.grid_log2_min + step * g);
  }
  return grid;
}

TuningResult tune_epsilon(const PointSet& points, const Vec& rho,
                          std::span<const double> eps2_grid) {
  validate_grid(eps2_grid);
  const Index n = points.rows();
  const Index d = points.cols();
  if (rho.size() != n || (rho.array() <= 0.0).any()) {
    throw Error(ErrorKind::kInvalidInput, "rho must be positive, one per sample");
  }
  const Index g_count = static_cast<Index>(eps2_grid.size());
  Vec inv_eps2(g_count);
  for (Index g = 0; g < g_count; ++g) inv_eps2[g] = 1.0 / eps2_grid[g];

  // Off-diagonal sums per row; reduced afterwards in row order.
  Mat row_sums = Mat::Zero(g_count, n);
#pragma omp parallel for schedule(dynamic, 32)
  for (Index m = 0; m < n; ++m) {
    const double* ym = points.row(m).data();
    double* acc = row_sums.col(m).data();
    for (Index j = m + 1; j < n; ++j) {
      const double a = sq_dist(ym, points.row(j).data(), d) / (rho[m] * rho[j]);
      // Largest eps first; contributions vanish once the exponent underflows.
      for (Index g = g_count - 1; g >= 0; --g) {
        const double x = a * inv_eps2[g];
        if (x > kExpCutoff) break;
        acc[g] += std::exp(-x);
      }
    }
  }
  Vec total = Vec::Constant(g_count, static_cast<double>(n));
  for (Index m = 0; m < n; ++m) total += 2.0 * row_sums.col(m);

  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  TuningResult result;
  result.curve.resize(static_cast<std::size_t>(g_count));
  for (Index g = 0; g < g_count; ++g) {
    auto& p = result.curve[static_cast<std::size_t>(g)];
    p.log_eps = 0.5 * std::log(eps2_grid[g]);
    p.log_s = std::log(total[g] / n2);
  }
  for (Index g = 0; g < g_count; ++g) {
    const Index lo = std::max<Index>(0, g - 1);
    const Index hi = std::min<Index>(g_count - 1, g + 1);
    const auto& a = result.curve[static_cast<std::size_t>(lo)];
    const auto& b = result.curve[static_cast<std::size_t>(hi)];
    result.curve[static_cast<std::size_t>(g)].slope =
        (b.log_s - a.log_s) / (b.log_eps - a.log_eps);
  }
  Index best = 0;
  for (Index g = 1; g < g_count; ++g) {
    if (result.curve[static_cast<std::size_t>(g)].slope >
        result.curve[static_cast<std::size_t>(best)].slope) {
      best = g;
    }
  }
  result.epsilon = std::sqrt(eps2_grid[best]);
  result.at_boundary = best == 0 || best == g_count - 1;
  return result;
}

double kernel_eval(const VecRef& y, const VecRef& y2, double epsilon,
                   double rho_y, double rho_y2) {
  const double r2 = (y - y2).squaredNorm();
  return std::exp(-r2 / (epsilon * epsilon * (rho_y * rho_y2)));
}

double kernel_dir_derivative(const VecRef& y, const VecRef& y2, const VecRef& w,
                             double epsilon, double rho_y, double rho_y2,
                             const VecRef& grad_rho_y) {
  const Vec diff = y - y2;
  const double r2 = diff.squaredNorm();
  const double denom = epsilon * epsilon * (rho_y * rho_y2);
  const double k = std::exp(-r2 / denom);
  return k * (-2.0 * diff.dot(w) / denom + r2 * grad_rho_y.dot(w) / (denom * rho_y));
}

VariableBandwidthKernel::VariableBandwidthKernel(PointSet train,
                                                 BandwidthModel model)
    : train_(std::move(train)), model_(std::move(model)) {
  const Index n = train_.rows();
  const Index d = train_.cols();
  if (n < 1) throw Error(ErrorKind::kInvalidInput, "empty training set");
  if (!(model_.epsilon > 0.0) || !(model_.pilot_epsilon > 0.0)) {
    throw Error(ErrorKind::kInvalidInput, "bandwidths must be positive");
  }
  const double floor = density_floor(n);
  Vec density(n);
  PointSet grad(n, d);
#pragma omp parallel for schedule(static)
  for (Index m = 0; m < n; ++m) {
    density[m] = std::max(floor, density_sum(train_, train_.row(m).data(),
                                             model_.pilot_epsilon,
                                             grad.row(m).data()));
  }
  model_.log_rho_scale = (model_.pilot_exponent * density.array().log()).mean();
  model_.rho_train.resize(n);
  grad_rho_train_.resize(n, d);
  for (Index m = 0; m < n; ++m) {
    const double rho = std::exp(model_.pilot_exponent * std::log(density[m]) -
                                model_.log_rho_scale);
    model_.rho_train[m] = rho;
    grad_rho_train_.row(m) = (model_.pilot_exponent * rho / density[m]) * grad.row(m);
  }
}

VariableBandwidthKernel VariableBandwidthKernel::fit(const PointSet& train,
                                                     const KernelConfig& config) {
  const auto grid = default_tuning_grid(train, config);
  BandwidthModel model;
  model.pilot_exponent = config.pilot_exponent;

  const auto pilot = tune_epsilon(train, Vec::Ones(train.rows()), grid);
  model.pilot_epsilon = pilot.epsilon;
  model.pilot_curve = pilot.curve;
  if (pilot.at_boundary) {
    model.warnings.push_back("pilot bandwidth tuning peaked at the grid boundary");
  }
  const Vec rho = bandwidth_function(pilot_density(train, model.pilot_epsilon),
                                     model.pilot_exponent);
  const auto tuned = tune_epsilon(train, rho, grid);
  model.epsilon = tuned.epsilon;
  model.tuning_curve = tuned.curve;
  if (tuned.at_boundary) {
    model.warnings.push_back("kernel bandwidth tuning peaked at the grid boundary");
  }
  return VariableBandwidthKernel(train, std::move(model));
}

PointBandwidth VariableBandwidthKernel::bandwidth_at(const VecRef& y) const {
  if (y.size() != dim()) throw Error(ErrorKind::kInvalidInput, "query dimension mismatch");
  if (!y.allFinite()) throw Error(ErrorKind::kInvalidInput, "non-finite query point");
  PointBandwidth out;
  out.grad_rho.resize(dim());
  const Vec yc = y;
  const double raw = density_sum(train_, yc.data(), model_.pilot_epsilon,
                                 out.grad_rho.data());
  const double floor = density_floor(size());
  out.density = std::max(floor, raw);
  out.rho = std::exp(model_.pilot_exponent * std::log(out.density) -
                     model_.log_rho_scale);
  if (raw > floor) {
    out.grad_rho *= model_.pilot_exponent * out.rho / out.density;
  } else {
    out.grad_rho.setZero();
  }
  return out;
}

void VariableBandwidthKernel::row(const VecRef& y, double rho_y,
                                  std::span<double> k_out) const {
  const Index n = size();
  const Index d = dim();
  const Vec yc = y;
  const double inv = 1.0 / (model_.epsilon * model_.epsilon * rho_y);
  for (Index j = 0; j < n; ++j) {
    const double r2 = sq_dist(yc.data(), train_.row(j).data(), d);
    k_out[static_cast<std::size_t>(j)] = std::exp(-r2 * inv / model_.rho_train[j]);
  }
}

void VariableBandwidthKernel::row_with_derivative(const VecRef& y,
                                                  const PointBandwidth& bw,
                                                  const VecRef& w,
                                                  std::span<double> k_out,
                                                  std::span<double> dk_out) const {
  const Index n = size();
  const Index d = dim();
  const Vec yc = y;
  const Vec wc = w;
  const double inv = 1.0 / (model_.epsilon * model_.epsilon * bw.rho);
  const double grad_term = bw.grad_rho.dot(wc) / bw.rho;
  for (Index j = 0; j < n; ++j) {
    const double* p = train_.row(j).data();
    double r2 = 0.0, proj = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double t = yc[i] - p[i];
      r2 += t * t;
      proj += t * wc[i];
    }
    const double a = inv / model_.rho_train[j];
    const double k = std::exp(-r2 * a);
    k_out[static_cast<std::size_t>(j)] = k;
    dk_out[static_cast<std::size_t>(j)] = k * a * (-2.0 * proj + r2 * grad_term);
  }
}

Mat VariableBandwidthKernel::matrix() const {
  const Index n = size();
  const Index d = dim();
  Mat k(n, n);
  // Column j uses the same arithmetic as row() queried at y_j.
#pragma omp parallel for schedule(dynamic, 32)
  for (Index j = 0; j < n; ++j) {
    const double* pj = train_.row(j).data();
    const double inv = 1.0 / (model_.epsilon * model_.epsilon * model_.rho_train[j]);
    k(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double r2 = sq_dist(pj, train_.row(i).data(), d);
      k(i, j) = std::exp(-r2 * inv / model_.rho_train[i]);
    }
  }
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

std::string tuning_curve_csv(const std::vector<TuningPoint>& curve) {
  std::string text = "log_eps,log_S,slope\n";
  for (const auto& p : curve) {
    text += io::format_double(p.log_eps) + ',' + io::format_double(p.log_s) + ',' +
            io::format_double(p.slope) + '\n';
  }
  return text;
}

}  // namespace koopgen
