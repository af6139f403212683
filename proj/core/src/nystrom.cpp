#include "koopgen/nystrom.hpp"

#include <cmath>

#include "koopgen/error.hpp"
#include "koopgen/io.hpp"

namespace koopgen {

Evaluator::Evaluator(VariableBandwidthKernel kernel, const KernelBasis& basis)
    : kernel_(std::move(kernel)), gamma_(basis.gamma) {
  if (basis.size() != kernel_.size()) {
    throw Error(ErrorKind::kInvalidInput, "basis and kernel training sets differ");
  }
  if ((basis.sigma.array() <= 0.0).any()) {
    throw Error(ErrorKind::kInvalidInput, "basis singular values must be positive");
  }
  const Vec inv_sqrt_q = basis.q.cwiseSqrt().cwiseInverse();
  gamma_scaled_ = inv_sqrt_q.asDiagonal() * basis.gamma *
                  basis.sigma.cwiseInverse().asDiagonal();
  gamma_scaled_ /= static_cast<double>(kernel_.size());
}

Evaluator::Evaluator(VariableBandwidthKernel kernel, const KernelBasis& basis,
                     const EigenSolution& solution)
    : Evaluator(std::move(kernel), basis) {
  if (solution.dcoef.rows() + 1 > basis.retained()) {
    throw Error(ErrorKind::kInvalidInput, "eigen solution uses more basis functions than retained");
  }
  dcoef_ = solution.dcoef;
}

Vec Evaluator::basis_at(const VecRef& y) const {
  const Index n = kernel_.size();
  const PointBandwidth bw = kernel_.bandwidth_at(y);
  Vec k(n);
  kernel_.row(y, bw.rho, std::span<double>(k.data(), static_cast<std::size_t>(n)));
  const double d = k.mean();
  return gamma_scaled_.transpose() * k / d;
}

Mat Evaluator::basis_values(const PointSet& ys) const {
  if (ys.cols() != kernel_.dim()) {
    throw Error(ErrorKind::kInvalidInput, "query dimension mismatch");
  }
  Mat out(ys.rows(), basis_size());
#pragma omp parallel for schedule(dynamic, 8)
  for (Index i = 0; i < ys.rows(); ++i) {
    const Vec y = ys.row(i).transpose();
    out.row(i) = basis_at(y).transpose();
  }
  return out;
}

Complex Evaluator::eigenfunction_from(const CVec& dcoef_column, const VecRef& y) const {
  const Index l = dcoef_column.size();
  if (l + 1 > basis_size()) {
    throw Error(ErrorKind::kInvalidInput, "too many coefficients for the basis");
  }
  const Vec phi = basis_at(y);
  Complex sum(0.0, 0.0);
  for (Index i = 0; i < l; ++i) sum += dcoef_column[i] * phi[i + 1];
  return sum;
}

Complex Evaluator::eigenfunction(Index j, const VecRef& y) const {
  if (j < 0 || j >= num_eigenfunctions()) {
    throw Error(ErrorKind::kInvalidInput, "eigenfunction index out of range");
  }
  return eigenfunction_from(dcoef_.col(j), y);
}

CMat Evaluator::eigenfunctions_at(const PointSet& ys,
                                  const std::vector<Index>& js) const {
  for (Index j : js) {
    if (j < 0 || j >= num_eigenfunctions()) {
      throw Error(ErrorKind::kInvalidInput, "eigenfunction index out of range");
    }
  }
  CMat sel(dcoef_.rows(), static_cast<Index>(js.size()));
  for (std::size_t a = 0; a < js.size(); ++a) sel.col(static_cast<Index>(a)) = dcoef_.col(js[a]);
  const Mat phi = basis_values(ys);
  return phi.middleCols(1, dcoef_.rows()).cast<Complex>() * sel;
}

Complex Evaluator::generator_action(const CVec& coeffs, const VecRef& y,
                                    const VecRef& w) const {
  if (coeffs.size() > basis_size()) {
    throw Error(ErrorKind::kInvalidInput, "too many coefficients for the basis");
  }
  if (w.size() != kernel_.dim()) {
    throw Error(ErrorKind::kInvalidInput, "tangent dimension mismatch");
  }
  const Index n = kernel_.size();
  const PointBandwidth bw = kernel_.bandwidth_at(y);
  Vec k(n), dk(n);
  kernel_.row_with_derivative(y, bw, w,
                              std::span<double>(k.data(), static_cast<std::size_t>(n)),
                              std::span<double>(dk.data(), static_cast<std::size_t>(n)));
  const double d = k.mean();
  const double d_prime = dk.mean();
  const Vec khat_prime = (dk - k * (d_prime / d)) / d;
  const Vec per_basis = gamma_scaled_.leftCols(coeffs.size()).transpose() * khat_prime;
  return (per_basis.cast<Complex>().transpose() * coeffs)(0);
}

Complex Evaluator::generator_action(const CVec& coeffs, const FlowSystem& system,
                                    const VecRef& x) const {
  return generator_action(coeffs, embed(system, x), pushforward_vector(system, x));
}

std::vector<EigenTimeSeries> reconstruct_timeseries(const Evaluator& evaluator,
                                                    const TrajectoryDataset& test,
                                                    const std::vector<Index>& js) {
  if (test.embedded.cols() != evaluator.kernel().dim()) {
    throw Error(ErrorKind::kInvalidInput, "test data dimension does not match training data");
  }
  const CMat values = evaluator.eigenfunctions_at(test.embedded, js);
  const Index n = test.size();
  Vec times(n);
  for (Index i = 0; i < n; ++i) times[i] = static_cast<double>(i) * test.dt;
  std::vector<EigenTimeSeries> out;
  for (std::size_t a = 0; a < js.size(); ++a) {
    out.push_back({js[a], times, values.col(static_cast<Index>(a))});
  }
  return out;
}

CVec autocorrelation(const CVec& series, Index max_lag_steps) {
  const Index n = series.size();
  if (max_lag_steps < 0 || n <= max_lag_steps) {
    throw Error(ErrorKind::kInvalidInput,
                "series of length " + std::to_string(n) + " is too short for lag " +
                    std::to_string(max_lag_steps));
  }
  if (!(series.squaredNorm() > 0.0)) {
    throw Error(ErrorKind::kDegenerateData, "autocorrelation of a zero series");
  }
  // Prefix sums of |v|^2 give both overlap energies in O(1) per lag.
  Vec energy(n + 1);
  energy[0] = 0.0;
  for (Index i = 0; i < n; ++i) energy[i + 1] = energy[i] + std::norm(series[i]);
  CVec c(max_lag_steps + 1);
  for (Index k = 0; k <= max_lag_steps; ++k) {
    const double head = energy[n - k];
    const double tail = energy[n] - energy[k];
    const double scale = std::sqrt(head * tail);
    c[k] = scale > 0.0 ? series.head(n - k).dot(series.tail(n - k)) / scale : Complex(0.0, 0.0);
  }
  c[0] = 1.0;
  return c;
}

std::string timeseries_csv(const std::vector<EigenTimeSeries>& series) {
  std::string text = "t";
  for (const auto& s : series) {
    const std::string j = std::to_string(s.j + 1);
    text += ",re_" + j + ",im_" + j + ",abs_" + j;
  }
  text += '\n';
  const Index n = series.empty() ? 0 : series.front().times.size();
  for (Index i = 0; i < n; ++i) {
    text += io::format_double(series.front().times[i]);
    for (const auto& s : series) {
      const Complex v = s.values[i];
      text += ',' + io::format_double(v.real()) + ',' + io::format_double(v.imag()) +
              ',' + io::format_double(std::abs(v));
    }
    text += '\n';
  }
  return text;
}

std::string autocorr_csv(double dt, const std::vector<Index>& js,
                         const std::vector<CVec>& correlations) {
  if (js.size() != correlations.size()) {
    throw Error(ErrorKind::kInvalidInput, "one correlation series per index expected");
  }
  std::string text = "lag_time";
  for (Index j : js) {
    const std::string s = std::to_string(j + 1);
    text += ",re_" + s + ",im_" + s + ",abs_" + s;
  }
  text += '\n';
  const Index n = correlations.empty() ? 0 : correlations.front().size();
  for (Index k = 0; k < n; ++k) {
    text += io::format_double(static_cast<double>(k) * dt);
    for (const auto& c : correlations) {
      text += ',' + io::format_double(c[k].real()) + ',' + io::format_double(c[k].imag()) +
              ',' + io::format_double(std::abs(c[k]));
    }
    text += '\n';
  }
  return text;
}

}  // namespace koopgen
