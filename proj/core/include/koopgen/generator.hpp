#pragma once

#include <string>
#include <vector>

#include "koopgen/basis.hpp"
#include "koopgen/dynamics.hpp"
#include "koopgen/kernels.hpp"
#include "koopgen/types.hpp"

namespace koopgen {

// Matrices of the regularized variational eigenvalue problem on the span of
// phi_1 .. phi_L.
struct GeneratorProblem {
  Mat V;       // V_ij = <phi_i, V phi_j>_N
  Mat V_anti;  // (V - V^T) / 2
  Mat A;       // Lambda_{tau/2} V_anti Lambda_{tau/2}
  Mat B;       // (zI - V)^T (zI - V)
  double z = 0.0;
  double tau = 0.0;
  Index L = 0;
};

// Generator matrix entries
//   V_ij = (1/(N^2 sigma_j)) sum_m sum_n phi_i(x_m) khat'(x_m, x_n) gamma_j(x_n)
// for basis columns i, j in [first, first + count), where khat' is the
// derivative of the normalized kernel along the pushforward vector w_m at
// y_m. Rows of khat' are formed blockwise and never stored whole.
Mat assemble_generator(const VariableBandwidthKernel& kernel,
                       const PointSet& tangents, const KernelBasis& basis,
                       Index first, Index count);

// Columns 1 .. L (the constant eigenfunction excluded).
Mat assemble_generator(const TrajectoryDataset& data, const FlowSystem& system,
                       const KernelBasis& basis,
                       const VariableBandwidthKernel& kernel, Index L);

GeneratorProblem assemble_forms(const Mat& V, const VecRef& lambda_tau_half,
                                double z);

// Semigroup weights from the basis spectrum, then assemble_forms.
GeneratorProblem build_problem(const Mat& V, const KernelBasis& basis, double z,
                               double tau);

struct GevpSolution {
  CVec beta;  // purely imaginary
  CMat c;     // columns are eigenvectors, B-orthonormal
  // max |S + S^T| / max |S| of the reduced matrix before it is antisymmetrized.
  double reduced_antisymmetry = 0.0;
};

// Solves A c = beta B c for antisymmetric A and symmetric positive definite B
// by Cholesky congruence to a real skew-symmetric standard problem. Nonzero
// eigenvalues come out in exact conjugate pairs (beta, c), (conj beta,
// conj c); null vectors are real.
GevpSolution solve_gevp(const Mat& A, const Mat& B);

// q_z(i omega) / i = omega / (z^2 + omega^2).
double qz(double omega, double z);

// Principal-branch inverse b_z(i lambda) / i = (1 + sqrt(1 - 4 z^2 lambda^2))
// / (2 lambda), with the square root clamped to zero beyond |lambda| = 1/(2z)
// and b_z(0) = 0. `clamped` reports whether the clamp was active.
double qz_inverse(double lambda, double z, bool* clamped = nullptr);

struct EigenSolution {
  CVec beta;
  Vec omega;
  CMat c;      // L x L, xi coefficients
  CMat dcoef;  // L x L, zeta coefficients, unit norm columns
  Vec energy;  // Dirichlet energies, nondecreasing
  // order[k] is the solve_gevp column placed at sorted position k.
  std::vector<Index> order;
  // pair[k] is the sorted position of the conjugate partner (k if unpaired).
  std::vector<Index> pair;
  int clamped_modes = 0;
  std::vector<std::string> warnings;

  Index size() const { return omega.size(); }
};

// Recovers zeta coefficients d_j = (zI - V) c_j, eigenfrequencies and
// Dirichlet energies, and sorts modes by energy with conjugate pairs
// adjacent (positive frequency first). `lambda` holds the basis eigenvalues
// lambda_1 .. lambda_L matching the rows of c.
EigenSolution finalize_solution(const GevpSolution& gevp, const Mat& V, double z,
                                const VecRef& lambda);

// Multiplies zeta-basis coefficients by exp(i omega_j t).
CVec evolve_observable(const EigenSolution& solution, const CVec& fhat, double t);

// Writes `j,omega,beta_re,beta_im,dirichlet_energy,pair_index`, j 1-based.
std::string eigs_csv(const EigenSolution& solution);

}  // namespace koopgen
