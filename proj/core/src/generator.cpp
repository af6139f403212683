#include "koopgen/generator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "koopgen/error.hpp"
#include "koopgen/io.hpp"

namespace koopgen {

namespace {

constexpr Index kAssemblyBlock = 256;
constexpr double kClusterTol = 1e-10;

// Modified Gram-Schmidt on the columns `cols` of d, mirroring every
// operation on c so that d = (zI - V) c keeps holding.
void reorthonormalize(CMat& d, CMat& c, const std::vector<Index>& cols) {
  for (std::size_t a = 0; a < cols.size(); ++a) {
    const Index i = cols[a];
    for (std::size_t b = 0; b < a; ++b) {
      const Index k = cols[b];
      const Complex proj = d.col(k).dot(d.col(i));
      d.col(i) -= proj * d.col(k);
      c.col(i) -= proj * c.col(k);
    }
    const double norm = d.col(i).norm();
    d.col(i) /= norm;
    c.col(i) /= norm;
  }
}

}  // namespace

Mat assemble_generator(const VariableBandwidthKernel& kernel,
                       const PointSet& tangents, const KernelBasis& basis,
                       Index first, Index count) {
  const Index n = kernel.size();
  if (basis.size() != n || tangents.rows() != n || tangents.cols() != kernel.dim()) {
    throw Error(ErrorKind::kInvalidInput,
                "basis, tangent vectors and training set disagree in size");
  }
  if (first < 0 || count < 0 || first + count > basis.retained()) {
    throw Error(ErrorKind::kInvalidInput, "requested basis columns are not retained");
  }
  const auto& train = kernel.points();
  const auto& rho = kernel.model().rho_train;
  const auto& grad_rho = kernel.grad_rho_train();
  const Vec inv_sqrt_q = basis.q.cwiseSqrt().cwiseInverse();
  const Mat phi = basis.phi.middleCols(first, count);
  // gamma_j has unit norm, so phi_j = Ktilde gamma_j / sigma_j carries 1/sigma_j.
  const Mat gamma = basis.gamma.middleCols(first, count) *
                    basis.sigma.segment(first, count).cwiseInverse().asDiagonal();

  Mat v = Mat::Zero(count, count);
  Mat block;
  for (Index b0 = 0; b0 < n; b0 += kAssemblyBlock) {
    const Index rows = std::min(kAssemblyBlock, n - b0);
    block.resize(rows, n);
#pragma omp parallel
    {
      std::vector<double> k(static_cast<std::size_t>(n));
      std::vector<double> dk(static_cast<std::size_t>(n));
      PointBandwidth bw;
#pragma omp for schedule(static)
      for (Index r = 0; r < rows; ++r) {
        const Index m = b0 + r;
        bw.rho = rho[m];
        bw.grad_rho = grad_rho.row(m).transpose();
        kernel.row_with_derivative(train.row(m).transpose(), bw,
                                   tangents.row(m).transpose(), k, dk);
        double d_prime = 0.0;
        for (Index j = 0; j < n; ++j) d_prime += dk[static_cast<std::size_t>(j)];
        d_prime /= static_cast<double>(n);
        const double dm = basis.d[m];
        const double ratio = d_prime / dm;
        for (Index j = 0; j < n; ++j) {
          const auto s = static_cast<std::size_t>(j);
          block(r, j) = (dk[s] - k[s] * ratio) / dm * inv_sqrt_q[j];
        }
      }
    }
    v.noalias() += phi.middleRows(b0, rows).transpose() * (block * gamma);
  }
  v /= static_cast<double>(n) * static_cast<double>(n);
  return v;
}

Mat assemble_generator(const TrajectoryDataset& data, const FlowSystem& system,
                       const KernelBasis& basis,
                       const VariableBandwidthKernel& kernel, Index L) {
  if (data.size() != kernel.size() ||
      (data.embedded - kernel.points()).cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorKind::kInvalidInput,
                "kernel was not built from this dataset's embeddings");
  }
  return assemble_generator(kernel, pushforward_vectors(system, data), basis, 1, L);
}

GeneratorProblem assemble_forms(const Mat& V, const VecRef& lambda_tau_half,
                                double z) {
  if (V.rows() != V.cols() || lambda_tau_half.size() != V.rows()) {
    throw Error(ErrorKind::kInvalidInput, "generator matrix/weights size mismatch");
  }
  if (!(z > 0.0)) throw Error(ErrorKind::kInvalidInput, "z must be positive");
  const Index l = V.rows();
  GeneratorProblem p;
  p.V = V;
  p.z = z;
  p.L = l;
  p.V_anti = 0.5 * (V - V.transpose());
  p.A = lambda_tau_half.asDiagonal() * p.V_anti * lambda_tau_half.asDiagonal();
  // The congruence preserves antisymmetry in exact arithmetic; make it exact.
  p.A = 0.5 * (p.A - p.A.transpose()).eval();
  const Mat shifted = z * Mat::Identity(l, l) - V;
  p.B.noalias() = shifted.transpose() * shifted;
  p.B = 0.5 * (p.B + p.B.transpose()).eval();
  return p;
}

GeneratorProblem build_problem(const Mat& V, const KernelBasis& basis, double z,
                               double tau) {
  const Index l = V.rows();
  if (basis.retained() < l + 1) {
    throw Error(ErrorKind::kInvalidInput, "basis has fewer than L + 1 functions");
  }
  const auto half = semigroup_spectrum(basis.lambda, 0.5 * tau);
  auto p = assemble_forms(V, half.lambda_tau.segment(1, l), z);
  p.tau = tau;
  return p;
}

GevpSolution solve_gevp(const Mat& A, const Mat& B) {
  const Index l = A.rows();
  if (A.cols() != l || B.rows() != l || B.cols() != l) {
    throw Error(ErrorKind::kInvalidInput, "A and B must be square and equal size");
  }
  Eigen::LLT<Mat> llt(B);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kNotPositiveDefinite,
                "B is not positive definite (z too small or V pathological)");
  }
  const Mat lower = llt.matrixL();
  // S = L^{-1} A L^{-T}.
  Mat x = lower.triangularView<Eigen::Lower>().solve(A);
  Mat s = lower.triangularView<Eigen::Lower>().solve(x.transpose()).transpose();

  GevpSolution out;
  const double scale = s.cwiseAbs().maxCoeff();
  out.reduced_antisymmetry =
      scale > 0.0 ? (s + s.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  s = 0.5 * (s - s.transpose()).eval();

  // i S is Hermitian with eigenvalues mu; S u = -i mu u.
  const CMat h = Complex(0.0, 1.0) * s.cast<Complex>();
  Eigen::SelfAdjointEigenSolver<CMat> eig(h);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::kDegenerateData, "Hermitian eigensolver failed");
  }
  const Vec& mu = eig.eigenvalues();
  const CMat& u = eig.eigenvectors();
  const double mu_scale = l > 0 ? mu.cwiseAbs().maxCoeff() : 0.0;
  const double zero_tol = std::max(1e-12 * mu_scale, 1e-300);

  std::vector<Index> positive, zero;
  for (Index j = 0; j < l; ++j) {
    if (mu[j] > zero_tol) positive.push_back(j);
    else if (mu[j] >= -zero_tol) zero.push_back(j);
  }
  const Index n_pos = static_cast<Index>(positive.size());
  const Index n_zero = l - 2 * n_pos;
  if (n_zero < 0 || n_zero < static_cast<Index>(zero.size()) - 1) {
    throw Error(ErrorKind::kDegenerateData,
                "skew-symmetric spectrum is not symmetric about zero");
  }

  CMat vecs(l, l);
  out.beta.resize(l);
  Index col = 0;
  // Largest |mu| first; each positive mode is followed by its conjugate.
  for (auto it = positive.rbegin(); it != positive.rend(); ++it) {
    const Index j = *it;
    vecs.col(col) = u.col(j);
    out.beta[col] = Complex(0.0, -mu[j]);
    vecs.col(col + 1) = u.col(j).conjugate();
    out.beta[col + 1] = Complex(0.0, mu[j]);
    col += 2;
  }
  if (n_zero > 0) {
    // Real orthonormal basis of the null space of the real matrix S.
    Mat stacked(l, 2 * static_cast<Index>(zero.size()));
    for (std::size_t k = 0; k < zero.size(); ++k) {
      stacked.col(2 * static_cast<Index>(k)) = u.col(zero[k]).real();
      stacked.col(2 * static_cast<Index>(k) + 1) = u.col(zero[k]).imag();
    }
    Eigen::JacobiSVD<Mat> svd(stacked, Eigen::ComputeThinU);
    for (Index k = 0; k < n_zero; ++k) {
      vecs.col(col) = svd.matrixU().col(k).cast<Complex>();
      out.beta[col] = Complex(0.0, 0.0);
      ++col;
    }
  }
  // c = L^{-T} u.
  out.c = lower.transpose().cast<Complex>().triangularView<Eigen::Upper>().solve(vecs);
  return out;
}

double qz(double omega, double z) { return omega / (z * z + omega * omega); }

double qz_inverse(double lambda, double z, bool* clamped) {
  if (clamped) *clamped = false;
  if (lambda == 0.0) return 0.0;
  const double t = 2.0 * z * lambda;
  double disc = (1.0 - t) * (1.0 + t);
  if (disc < 0.0) {
    disc = 0.0;
    if (clamped) *clamped = true;
  }
  return (1.0 + std::sqrt(disc)) / (2.0 * lambda);
}

EigenSolution finalize_solution(const GevpSolution& gevp, const Mat& V, double z,
                                const VecRef& lambda) {
  const Index l = V.rows();
  if (V.cols() != l || gevp.beta.size() != l || gevp.c.rows() != l ||
      gevp.c.cols() != l || lambda.size() != l) {
    throw Error(ErrorKind::kInvalidInput, "eigenproblem dimensions disagree");
  }
  CMat c = gevp.c;
  const CMat shifted = (z * Mat::Identity(l, l) - V).cast<Complex>();
  CMat d = shifted * c;
  for (Index j = 0; j < l; ++j) {
    const double norm = d.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorKind::kDegenerateMode,
                  "mode " + std::to_string(j) + " has a vanishing zeta vector");
    }
    d.col(j) /= norm;
    c.col(j) /= norm;
  }
  CVec beta(l);
  for (Index j = 0; j < l; ++j) beta[j] = Complex(0.0, gevp.beta[j].imag());

  // Conjugate partners: matching eigenvalue and conjugate coefficients.
  const double beta_scale = std::max(1.0, beta.cwiseAbs().maxCoeff());
  std::vector<Index> partner(static_cast<std::size_t>(l), -1);
  for (Index j = 0; j < l; ++j) {
    if (partner[j] >= 0 || !(beta[j].imag() > 0.0)) continue;
    Index best = -1;
    double best_err = 0.0;
    for (Index k = 0; k < l; ++k) {
      if (k == j || partner[k] >= 0) continue;
      if (std::abs(beta[k] - std::conj(beta[j])) > 1e-8 * beta_scale) continue;
      const double err = (c.col(k) - c.col(j).conjugate()).norm();
      if (best < 0 || err < best_err) {
        best = k;
        best_err = err;
      }
    }
    if (best >= 0) {
      partner[j] = best;
      partner[best] = j;
    }
  }

  // Degenerate clusters among upper-half-plane and zero eigenvalues; lower
  // half-plane partners are rebuilt as conjugates afterwards.
  std::vector<bool> seen(static_cast<std::size_t>(l), false);
  for (Index j = 0; j < l; ++j) {
    if (seen[j] || beta[j].imag() < 0.0) continue;
    std::vector<Index> cluster;
    for (Index k = j; k < l; ++k) {
      if (!seen[k] && beta[k].imag() >= 0.0 &&
          std::abs(beta[k] - beta[j]) <= kClusterTol) {
        cluster.push_back(k);
        seen[k] = true;
      }
    }
    if (cluster.size() > 1) reorthonormalize(d, c, cluster);
  }
  for (Index j = 0; j < l; ++j) {
    if (beta[j].imag() > 0.0 && partner[j] >= 0) {
      d.col(partner[j]) = d.col(j).conjugate();
      c.col(partner[j]) = c.col(j).conjugate();
    }
  }

  EigenSolution raw;
  raw.omega.resize(l);
  raw.energy.resize(l);
  for (Index j = 0; j < l; ++j) {
    bool clamped = false;
    raw.omega[j] = qz_inverse(beta[j].imag(), z, &clamped);
    if (clamped) ++raw.clamped_modes;
    raw.energy[j] = dirichlet_energy(d.col(j), lambda);
  }
  if (raw.clamped_modes > 0) {
    raw.warnings.push_back(std::to_string(raw.clamped_modes) +
                           " eigenvalues outside i[-1/(2z), 1/(2z)]; b_z clamped");
  }

  // Sort units (conjugate pairs or singletons) by energy.
  struct Unit {
    double energy;
    double abs_omega;
    Index first;
    Index second;  // -1 for singletons
  };
  std::vector<Unit> units;
  for (Index j = 0; j < l; ++j) {
    const Index p = partner[j];
    if (p >= 0 && p < j) continue;
    Unit u{raw.energy[j], std::abs(raw.omega[j]), j, p};
    if (p >= 0 && raw.omega[p] > raw.omega[j]) std::swap(u.first, u.second);
    if (p >= 0) u.energy = std::min(raw.energy[j], raw.energy[p]);
    units.push_back(u);
  }
  std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return a.abs_omega < b.abs_omega;
  });

  EigenSolution out;
  out.clamped_modes = raw.clamped_modes;
  out.warnings = raw.warnings;
  out.beta.resize(l);
  out.omega.resize(l);
  out.energy.resize(l);
  out.c.resize(l, l);
  out.dcoef.resize(l, l);
  out.pair.assign(static_cast<std::size_t>(l), 0);
  for (const auto& u : units) {
    const Index pos = static_cast<Index>(out.order.size());
    out.order.push_back(u.first);
    out.pair[pos] = pos;
    if (u.second >= 0) {
      out.order.push_back(u.second);
      out.pair[pos] = pos + 1;
      out.pair[pos + 1] = pos;
    }
  }
  for (Index k = 0; k < l; ++k) {
    const Index src = out.order[k];
    out.beta[k] = beta[src];
    out.omega[k] = raw.omega[src];
    out.energy[k] = raw.energy[src];
    out.c.col(k) = c.col(src);
    out.dcoef.col(k) = d.col(src);
  }
  return out;
}

CVec evolve_observable(const EigenSolution& solution, const CVec& fhat, double t) {
  if (fhat.size() != solution.size()) {
    throw Error(ErrorKind::kInvalidInput, "coefficient vector size mismatch");
  }
  CVec out(fhat.size());
  for (Index j = 0; j < fhat.size(); ++j) {
    out[j] = fhat[j] * std::polar(1.0, solution.omega[j] * t);
  }
  return out;
}

std::string eigs_csv(const EigenSolution& solution) {
  std::string text = "j,omega,beta_re,beta_im,dirichlet_energy,pair_index\n";
  for (Index k = 0; k < solution.size(); ++k) {
    text += std::to_string(k + 1) + ',' + io::format_double(solution.omega[k]) + ',' +
            io::format_double(solution.beta[k].real()) + ',' +
            io::format_double(solution.beta[k].imag()) + ',' +
            io::format_double(solution.energy[k]) + ',' +
            std::to_string(solution.pair[k] + 1) + '\n';
  }
  return text;
}

}  // namespace koopgen
