#pragma once

#include <string>
#include <vector>

#include "koopgen/basis.hpp"
#include "koopgen/dynamics.hpp"
#include "koopgen/generator.hpp"
#include "koopgen/kernels.hpp"
#include "koopgen/types.hpp"

namespace koopgen {

// Out-of-sample representatives
//   phi~_j(y) = (1/sigma_j) (1/N) sum_n k(y, y_n) / (d(y) sqrt(q_n)) gamma_j(n),
// with d(y) the mean kernel section at y. q is only ever needed at training
// points. Immutable after construction; queries may run concurrently.
class Evaluator {
 public:
  Evaluator(VariableBandwidthKernel kernel, const KernelBasis& basis);
  // dcoef rows correspond to basis columns 1 .. L.
  Evaluator(VariableBandwidthKernel kernel, const KernelBasis& basis,
            const EigenSolution& solution);

  Index basis_size() const { return gamma_.cols(); }
  Index num_eigenfunctions() const { return dcoef_.cols(); }
  const VariableBandwidthKernel& kernel() const { return kernel_; }

  // phi~_0 .. phi~_{L'-1} at y.
  Vec basis_at(const VecRef& y) const;
  // One row per query point.
  Mat basis_values(const PointSet& ys) const;

  // zeta~_j(y) = sum_{i=1}^{L} dcoef(i-1, j) phi~_i(y), j 0-based in sorted order.
  Complex eigenfunction(Index j, const VecRef& y) const;
  // Sum of coefficients against phi~_1 .. phi~_L.
  Complex eigenfunction_from(const CVec& dcoef_column, const VecRef& y) const;
  // Rows are query points, columns the requested eigenfunctions.
  CMat eigenfunctions_at(const PointSet& ys, const std::vector<Index>& js) const;

  // w . grad_y sum_j coeffs_j phi~_j(y) for coefficients over phi_0 .. phi_{L'-1}.
  Complex generator_action(const CVec& coeffs, const VecRef& y, const VecRef& w) const;
  // Tangent taken as the pushforward of the vector field at state x.
  Complex generator_action(const CVec& coeffs, const FlowSystem& system,
                           const VecRef& x) const;

 private:
  VariableBandwidthKernel kernel_;
  Mat gamma_scaled_;  // gamma_j(n) / (sigma_j sqrt(q_n)), N x L'
  Mat gamma_;
  CMat dcoef_;
};

struct EigenTimeSeries {
  Index j = 0;  // 0-based sorted index
  Vec times;
  CVec values;
};

std::vector<EigenTimeSeries> reconstruct_timeseries(const Evaluator& evaluator,
                                                    const TrajectoryDataset& test,
                                                    const std::vector<Index>& js);

// Normalized estimator over the overlapping pairs n = 0 .. N-k-1,
//   C(k) = sum_n conj(v_n) v_{n+k} / sqrt(sum_n |v_n|^2 sum_n |v_{n+k}|^2),
// for k = 0 .. max_lag_steps. |C(k)| <= 1, C(0) = 1, and a pure phase
// series gives exactly exp(i omega k dt).
CVec autocorrelation(const CVec& series, Index max_lag_steps);

// `t,re_<j>,im_<j>,abs_<j>` per series, j printed 1-based.
std::string timeseries_csv(const std::vector<EigenTimeSeries>& series);
// `lag_time,re_<j>,im_<j>,abs_<j>`; one column of correlations per j.
std::string autocorr_csv(double dt, const std::vector<Index>& js,
                         const std::vector<CVec>& correlations);

}  // namespace koopgen
