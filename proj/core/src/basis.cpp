#include "koopgen/basis.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "koopgen/error.hpp"

namespace koopgen {

Normalization normalize_bistochastic(const Mat& kernel) {
  const Index n = kernel.rows();
  if (n == 0 || kernel.cols() != n) {
    throw Error(ErrorKind::kInvalidInput, "kernel matrix must be square and non-empty");
  }
  Normalization out;
  out.d = kernel.rowwise().mean();
  if ((out.d.array() <= 0.0).any() || !out.d.allFinite()) {
    throw Error(ErrorKind::kDegenerateData, "kernel matrix has a zero row");
  }
  const Vec inv_d = out.d.cwiseInverse();
  out.q = (kernel * inv_d) / static_cast<double>(n);
  if ((out.q.array() <= 0.0).any() || !out.q.allFinite()) {
    throw Error(ErrorKind::kDegenerateData, "second normalization vanished");
  }
  const Vec inv_sqrt_q = out.q.cwiseSqrt().cwiseInverse();
  out.khat = inv_d.asDiagonal() * kernel * inv_sqrt_q.asDiagonal();
  return out;
}

Mat markov_matrix(const Mat& khat) {
  const Index n = khat.rows();
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  Mat p = Mat::Zero(n, n);
  p.selfadjointView<Eigen::Lower>().rankUpdate(khat, scale);
  p.triangularView<Eigen::StrictlyUpper>() = p.transpose();
  return p;
}

KernelBasis compute_basis(const Normalization& normalized, Index L) {
  const Mat& khat = normalized.khat;
  const Index n = khat.rows();
  const Index keep = L + 1;
  if (L < 0 || keep > n) {
    throw Error(ErrorKind::kInvalidInput,
                "need L + 1 <= N (L=" + std::to_string(L) + ", N=" + std::to_string(n) + ")");
  }
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  Mat p = Mat::Zero(n, n);
  p.selfadjointView<Eigen::Lower>().rankUpdate(khat, scale);

  // Top `keep` eigenpairs of the symmetric Markov matrix.
  Vec w(n);
  Mat z(n, keep);
  lapack_int found = 0;
  std::vector<lapack_int> support(static_cast<std::size_t>(2 * keep));
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(n), p.data(),
      static_cast<lapack_int>(n), 0.0, 0.0, static_cast<lapack_int>(n - keep + 1),
      static_cast<lapack_int>(n), 0.0, &found, w.data(), z.data(),
      static_cast<lapack_int>(n), support.data());
  if (info != 0 || found != keep) {
    throw Error(ErrorKind::kDegenerateData,
                "symmetric eigensolver failed (info=" + std::to_string(info) + ")");
  }

  KernelBasis basis;
  basis.d = normalized.d;
  basis.q = normalized.q;
  basis.lambda.resize(keep);
  basis.phi.resize(n, keep);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < keep; ++j) {
    // dsyevr returns ascending order.
    const Index src = keep - 1 - j;
    basis.lambda[j] = w[src];
    basis.phi.col(j) = root_n * z.col(src);
  }
  Index usable = 0;
  while (usable < keep && basis.lambda[usable] >= kMinBasisEigenvalue) ++usable;
  if (usable < keep) {
    throw Error(ErrorKind::kInsufficientRank,
                "only " + std::to_string(usable) +
                    " numerically positive eigenvalues; max usable L is " +
                    std::to_string(std::max<Index>(0, usable - 1)));
  }
  for (Index j = 0; j < keep; ++j) {
    auto col = basis.phi.col(j);
    for (Index i = 0; i < n; ++i) {
      if (std::abs(col[i]) > 1e-12) {
        if (col[i] < 0.0) col = -col;
        break;
      }
    }
  }
  basis.sigma = basis.lambda.cwiseSqrt();
  basis.gamma.noalias() = khat.transpose() * basis.phi;
  basis.gamma *= (1.0 / static_cast<double>(n)) *
                 basis.sigma.cwiseInverse().asDiagonal();
  return basis;
}

SemigroupSpectrum semigroup_spectrum(const Vec& lambda, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::kInvalidInput, "tau must be >= 0");
  if (lambda.size() < 2) {
    throw Error(ErrorKind::kInvalidInput, "need at least two eigenvalues");
  }
  if ((lambda.array() <= 0.0).any()) {
    throw Error(ErrorKind::kInvalidInput, "eigenvalues must be positive");
  }
  if (!(lambda[1] < 1.0)) {
    throw Error(ErrorKind::kDegenerateData,
                "lambda_1 = 1: the Markov basis is not ergodic");
  }
  SemigroupSpectrum out;
  out.tau = tau;
  out.eta.resize(lambda.size());
  const double denom = 1.0 / lambda[1] - 1.0;
  for (Index j = 0; j < lambda.size(); ++j) {
    out.eta[j] = (1.0 / lambda[j] - 1.0) / denom;
  }
  out.eta[0] = 0.0;
  out.eta[1] = 1.0;
  out.lambda_tau = (-tau * out.eta.array()).exp();
  return out;
}

double dirichlet_energy(const Eigen::Ref<const CVec>& coeffs, const VecRef& lambda) {
  if (coeffs.size() != lambda.size()) {
    throw Error(ErrorKind::kInvalidInput, "coefficient/eigenvalue size mismatch");
  }
  const double norm2 = coeffs.squaredNorm();
  if (!(norm2 > 0.0)) {
    throw Error(ErrorKind::kInvalidInput, "Dirichlet energy of the zero vector");
  }
  double weighted = 0.0;
  for (Index j = 0; j < coeffs.size(); ++j) {
    weighted += std::norm(coeffs[j]) / lambda[j];
  }
  // Rounding can push the constant function slightly below zero.
  return std::max(0.0, weighted / norm2 - 1.0);
}

}  // namespace koopgen
