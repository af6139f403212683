#pragma once

#include "koopgen/types.hpp"

namespace koopgen {

// Bistochastic normalization of a symmetric positive kernel matrix under the
// sampling measure (1/N) sum delta:
//   d_m = (1/N) sum_n K_mn,  q_m = (1/N) sum_n K_mn / d_n,
//   khat_mn = K_mn / (d_m sqrt(q_n)).
struct Normalization {
  Vec d;
  Vec q;
  Mat khat;
};

Normalization normalize_bistochastic(const Mat& kernel);

// Eigenbasis of the Markov operator P = khat khat^T / N^2, obtained as the
// SVD of Ktilde = khat / N. Columns are normalized so that
// (1/N) phi^T phi = I and (1/N) gamma^T gamma = I, with Ktilde gamma_j =
// sigma_j phi_j. Column 0 is the constant eigenfunction.
struct KernelBasis {
  Vec d;
  Vec q;
  Vec lambda;  // descending, lambda[0] = 1
  Vec sigma;   // sqrt(lambda)
  Mat phi;     // N x L'
  Mat gamma;   // N x L'

  Index size() const { return phi.rows(); }
  Index retained() const { return lambda.size(); }
};

// Smallest eigenvalue treated as numerically positive.
inline constexpr double kMinBasisEigenvalue = 1e-14;

// Retains L + 1 eigenpairs (including the constant). Throws
// kInsufficientRank when fewer are numerically positive.
KernelBasis compute_basis(const Normalization& normalized, Index L);

// Dense Markov matrix khat khat^T / N^2; rows sum to one.
Mat markov_matrix(const Mat& khat);

struct SemigroupSpectrum {
  double tau = 0.0;
  Vec eta;         // eta_0 = 0, eta_1 = 1
  Vec lambda_tau;  // exp(-tau eta)
};

// eta_j = (1/lambda_j - 1) / (1/lambda_1 - 1).
SemigroupSpectrum semigroup_spectrum(const Vec& lambda, double tau);

// (sum |c_j|^2 / lambda_j) / (sum |c_j|^2) - 1 for coefficients c_j against
// basis functions with eigenvalues lambda_j.
double dirichlet_energy(const Eigen::Ref<const CVec>& coeffs, const VecRef& lambda);

}  // namespace koopgen
