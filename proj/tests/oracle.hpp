#pragma once

// Reference implementations used to check the library. Everything here is
// written directly from the defining formulas with plain loops and shares no
// code with the library beyond the container types.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double sq_dist(const Points& a, Eigen::Index i, const Vec& y) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - y[c]) * (a(i, c) - y[c]);
  return s;
}

inline double kernel(const Vec& y, const Vec& y2, double eps, double r1, double r2) {
  return std::exp(-(y - y2).squaredNorm() / (eps * eps * r1 * r2));
}

inline double pilot_density(const Points& train, const Vec& y, double pilot_eps) {
  double s = 0.0;
  for (Eigen::Index n = 0; n < train.rows(); ++n) {
    s += std::exp(-sq_dist(train, n, y) / (pilot_eps * pilot_eps));
  }
  return s / static_cast<double>(train.rows());
}

// rho(y) = density(y)^exponent / exp(log_scale).
inline double bandwidth(const Points& train, const Vec& y, double pilot_eps, double exponent,
                        double log_scale) {
  return std::exp(exponent * std::log(pilot_density(train, y, pilot_eps)) - log_scale);
}

struct Normalized {
  Vec d, q;
  Mat khat;
};

inline Normalized bistochastic(const Mat& k) {
  const Eigen::Index n = k.rows();
  Normalized out;
  out.d = Vec::Zero(n);
  out.q = Vec::Zero(n);
  out.khat.resize(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    for (Eigen::Index j = 0; j < n; ++j) out.d[m] += k(m, j) / n;
  }
  for (Eigen::Index m = 0; m < n; ++m) {
    for (Eigen::Index j = 0; j < n; ++j) out.q[m] += k(m, j) / out.d[j] / n;
  }
  for (Eigen::Index m = 0; m < n; ++m) {
    for (Eigen::Index j = 0; j < n; ++j) out.khat(m, j) = k(m, j) / (out.d[m] * std::sqrt(out.q[j]));
  }
  return out;
}

// Out-of-sample basis function value straight from the Nystrom sum.
struct Nystrom {
  Points train;
  double eps, pilot_eps, exponent, log_scale;
  Vec rho_train, q, sigma;
  Mat gamma;

  double rho(const Vec& y) const { return bandwidth(train, y, pilot_eps, exponent, log_scale); }

  double phi(Eigen::Index j, const Vec& y) const {
    const Eigen::Index n = train.rows();
    const double ry = rho(y);
    double d = 0.0, acc = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
      const double k = kernel(y, train.row(m).transpose(), eps, ry, rho_train[m]);
      d += k;
      acc += k / std::sqrt(q[m]) * gamma(m, j);
    }
    return acc / d / sigma[j];
  }
};

// Eigenvalues of the pencil (A, B) from a general complex solve of B^{-1} A.
inline Eigen::VectorXcd pencil_eigenvalues(const Mat& a, const Mat& b) {
  const Mat m = b.lu().solve(a);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m.cast<std::complex<double>>());
  return es.eigenvalues();
}

inline double lorenz_divergence(double sigma, double beta) { return -(sigma + 1.0 + beta); }

}  // namespace oracle
