#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "koopgen/basis.hpp"
#include "koopgen/dynamics.hpp"
#include "koopgen/error.hpp"
#include "koopgen/generator.hpp"
#include "koopgen/kernels.hpp"
#include "koopgen/nystrom.hpp"
#include "oracle.hpp"

using namespace koopgen;

namespace {

struct Model {
  FlowSystem sys;
  TrajectoryDataset data;
  VariableBandwidthKernel kernel;
  KernelBasis basis;
  EigenSolution solution;
};

Model make_model(SystemKind kind, Index n, Index L) {
  const auto sys = FlowSystem::make(kind);
  const double dt = kind == SystemKind::kLorenz63 ? 0.3 : std::sqrt(7.0);
  auto data = generate_dataset(sys, random_initial_state(sys, 5), n, dt,
                               kind == SystemKind::kLorenz63 ? 100 : 0, auto_substeps(dt));
  auto kernel = VariableBandwidthKernel::fit(data.embedded);
  auto basis = compute_basis(normalize_bistochastic(kernel.matrix()), L);
  const Mat v = assemble_generator(data, sys, basis, kernel, L);
  const auto problem = build_problem(v, basis, 0.1, 1e-3);
  auto solution = finalize_solution(solve_gevp(problem.A, problem.B), v, 0.1,
                                    basis.lambda.segment(1, L));
  return {sys, std::move(data), std::move(kernel), std::move(basis), std::move(solution)};
}

const Model& model(SystemKind kind) {
  static const Model torus = make_model(SystemKind::kTorusRotation, 300, 10);
  static const Model stepanoff = make_model(SystemKind::kStepanoff, 300, 10);
  static const Model lorenz = make_model(SystemKind::kLorenz63, 300, 10);
  switch (kind) {
    case SystemKind::kTorusRotation: return torus;
    case SystemKind::kStepanoff: return stepanoff;
    default: return lorenz;
  }
}

Evaluator evaluator(const Model& m) { return Evaluator(m.kernel, m.basis, m.solution); }

}  // namespace

class NystromSystems : public ::testing::TestWithParam<SystemKind> {};

TEST_P(NystromSystems, InSampleBasisConsistency) {
  const auto& m = model(GetParam());
  const Mat phi = evaluator(m).basis_values(m.data.embedded);
  for (Index j = 0; j < m.basis.retained(); ++j) {
    const double scale = m.basis.phi.col(j).cwiseAbs().maxCoeff();
    EXPECT_LE((phi.col(j) - m.basis.phi.col(j)).cwiseAbs().maxCoeff(), 1e-8 * scale) << j;
  }
}

TEST_P(NystromSystems, MatchesOracleOutOfSample) {
  const auto& m = model(GetParam());
  const auto ev = evaluator(m);
  const auto& km = m.kernel.model();
  const oracle::Nystrom o{m.kernel.points(), km.epsilon, km.pilot_epsilon, km.pilot_exponent,
                          km.log_rho_scale, km.rho_train, m.basis.q, m.basis.sigma, m.basis.gamma};
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Vec x = generate_dataset(m.sys, random_initial_state(m.sys, 100 + s), 2, 1.0,
                                   m.sys.on_torus() ? 0 : 200, 100).states.row(1).transpose();
    const Vec y = embed(m.sys, x);
    const Vec phi = ev.basis_at(y);
    for (Index j = 0; j < phi.size(); ++j) EXPECT_NEAR(phi[j], o.phi(j, y), 1e-10) << j;
  }
}

TEST_P(NystromSystems, ConstantRepresentative) {
  const auto& m = model(GetParam());
  const auto ev = evaluator(m);
  const auto test = generate_dataset(m.sys, random_initial_state(m.sys, 77), 50, 0.1,
                                     m.sys.on_torus() ? 0 : 100, 10);
  const Mat phi = ev.basis_values(test.embedded);
  EXPECT_LE((phi.col(0).array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST_P(NystromSystems, InSampleEigenfunctions) {
  const auto& m = model(GetParam());
  const auto ev = evaluator(m);
  std::vector<Index> js;
  for (Index j = 0; j < m.solution.size(); ++j) js.push_back(j);
  const CMat oos = ev.eigenfunctions_at(m.data.embedded, js);
  const CMat in = m.basis.phi.middleCols(1, m.solution.dcoef.rows()).cast<Complex>() * m.solution.dcoef;
  EXPECT_LE((oos - in).cwiseAbs().maxCoeff(), 1e-8 * in.cwiseAbs().maxCoeff());
  const auto series = reconstruct_timeseries(ev, m.data, js);
  ASSERT_EQ(series.size(), js.size());
  for (std::size_t a = 0; a < js.size(); ++a) {
    EXPECT_LE((series[a].values - in.col(static_cast<Index>(a))).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST_P(NystromSystems, LinearityAndConjugation) {
  const auto& m = model(GetParam());
  const auto ev = evaluator(m);
  const Vec y = m.data.embedded.row(7).transpose() * 1.001;
  const CVec d1 = m.solution.dcoef.col(0), d2 = m.solution.dcoef.col(2);
  const Complex a(0.3, -1.2), b(2.0, 0.5);
  const Complex lhs = ev.eigenfunction_from(a * d1 + b * d2, y);
  const Complex rhs = a * ev.eigenfunction_from(d1, y) + b * ev.eigenfunction_from(d2, y);
  EXPECT_LE(std::abs(lhs - rhs), 1e-12 * (1 + std::abs(rhs)));
  EXPECT_LE(std::abs(ev.eigenfunction_from(d1.conjugate(), y) - std::conj(ev.eigenfunction_from(d1, y))),
            1e-14);
  CVec unit = CVec::Zero(d1.size());
  unit[0] = 1.0;
  EXPECT_NEAR(ev.eigenfunction_from(unit, y).real(), ev.basis_at(y)[1], 1e-15);
  EXPECT_EQ(ev.eigenfunction(0, y), ev.eigenfunction_from(d1, y));
  EXPECT_THROW(ev.eigenfunction(m.solution.size(), y), Error);
}

TEST_P(NystromSystems, GeneratorActionBasics) {
  const auto& m = model(GetParam());
  const auto ev = evaluator(m);
  const Vec x = m.data.states.row(11).transpose();
  const Vec y = embed(m.sys, x);
  CVec e0 = CVec::Zero(ev.basis_size()), e1 = e0;
  e0[0] = 1.0;
  e1[1] = 1.0;
  EXPECT_EQ(ev.generator_action(e1, y, Vec::Zero(y.size())), Complex(0, 0));
  const double scale = std::abs(ev.generator_action(e1, m.sys, x));
  ASSERT_GT(scale, 0.0);
  EXPECT_LE(std::abs(ev.generator_action(e0, m.sys, x)), 1e-6 * scale);
}

TEST_P(NystromSystems, FlowDerivativeIdentity) {
  const auto& m = model(GetParam());
  const auto ev = evaluator(m);
  const double h = 1e-4;
  const int substeps = 10;
  const auto test = generate_dataset(m.sys, random_initial_state(m.sys, 55), 40, 0.53,
                                     m.sys.on_torus() ? 0 : 100, 53);
  for (Index j = 1; j < ev.basis_size(); j += 3) {
    CVec e = CVec::Zero(ev.basis_size());
    e[j] = 1.0;
    std::vector<double> analytic, fd;
    for (Index t = 0; t < test.size(); ++t) {
      const Vec x = test.states.row(t).transpose();
      const Vec yp = embed(m.sys, advance(m.sys, x, h, substeps));
      const Vec ym = embed(m.sys, advance(m.sys, x, -h, substeps));
      fd.push_back((ev.basis_at(yp)[j] - ev.basis_at(ym)[j]) / (2 * h));
      analytic.push_back(ev.generator_action(e, m.sys, x).real());
    }
    double peak = 0.0;
    for (double v : fd) peak = std::max(peak, std::abs(v));
    for (std::size_t t = 0; t < fd.size(); ++t) {
      EXPECT_LE(std::abs(analytic[t] - fd[t]), 1e-4 * std::max(std::abs(fd[t]), 1e-3 * peak))
          << "j=" << j << " t=" << t;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllSystems, NystromSystems,
                         ::testing::Values(SystemKind::kTorusRotation, SystemKind::kStepanoff,
                                           SystemKind::kLorenz63),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Nystrom, ConstantKernelGivesUnitRepresentative) {
  PointSet train(3, 2);
  train << 0, 0, 1, 0, 0, 2;
  BandwidthModel bm;
  bm.epsilon = 1e150;
  bm.pilot_epsilon = 1e150;
  bm.rho_train = Vec::Ones(3);
  VariableBandwidthKernel kernel(train, bm);
  ASSERT_EQ(kernel.matrix(), Mat::Ones(3, 3));
  const auto basis = compute_basis(normalize_bistochastic(kernel.matrix()), 0);
  const Evaluator ev(kernel, basis);
  EXPECT_NEAR(ev.basis_at(Vec((Vec(2) << 5, -3).finished()))[0], 1.0, 1e-15);
}

TEST(Nystrom, SingleTestSample) {
  const auto& m = model(SystemKind::kTorusRotation);
  const auto ev = evaluator(m);
  TrajectoryDataset one;
  one.dt = 0.01;
  one.states = random_initial_state(m.sys, 9).transpose();
  one.embedded = embed(m.sys, one.states.row(0).transpose()).transpose();
  const auto series = reconstruct_timeseries(ev, one, {0, 1});
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].values.size(), 1);
  EXPECT_EQ(series[0].values[0], ev.eigenfunction(0, one.embedded.row(0).transpose()));
  const TrajectoryDataset wrong{PointSet::Zero(2, 3), PointSet::Zero(2, 3), 0.01, 0};
  EXPECT_THROW(reconstruct_timeseries(ev, wrong, {0}), Error);
}

TEST(Autocorrelation, UnitAtZeroLagAndBounded) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  CVec v(500);
  for (Index i = 0; i < v.size(); ++i) v[i] = Complex(g(rng), 0.5 * g(rng));
  const CVec c = autocorrelation(v, 100);
  EXPECT_EQ(c[0], Complex(1.0, 0.0));
  for (Index k = 0; k < c.size(); ++k) EXPECT_LE(std::abs(c[k]), 1.0 + 1e-15);
}

TEST(Autocorrelation, PurePhase) {
  const double omega = 5.477, dt = 0.01;
  CVec v(2000);
  for (Index n = 0; n < v.size(); ++n) v[n] = std::polar(1.0, omega * n * dt);
  const CVec c = autocorrelation(v, 1999);
  for (Index k = 0; k < c.size(); ++k) {
    EXPECT_LE(std::abs(c[k] - std::polar(1.0, omega * k * dt)), 1e-12) << k;
  }
}

TEST(Autocorrelation, WhiteNoise) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  CVec v(10000);
  for (Index i = 0; i < v.size(); ++i) v[i] = g(rng);
  const CVec c = autocorrelation(v, 200);
  for (Index k = 1; k < c.size(); ++k) EXPECT_LE(std::abs(c[k]), 0.05) << k;
}

TEST(Autocorrelation, Errors) {
  try {
    autocorrelation(CVec::Zero(10), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateData);
  }
  EXPECT_THROW(autocorrelation(CVec::Ones(10), 10), Error);
  EXPECT_THROW(autocorrelation(CVec::Ones(10), -1), Error);
}

TEST(Csv, TimeseriesAndAutocorr) {
  EigenTimeSeries s{2, (Vec(2) << 0, 0.01).finished(),
                    (CVec(2) << Complex(1, 0), Complex(0, -1)).finished()};
  EXPECT_EQ(timeseries_csv({s}), "t,re_3,im_3,abs_3\n0,1,0,1\n0.01,0,-1,1\n");
  const CVec c = (CVec(2) << Complex(1, 0), Complex(0.6, 0.8)).finished();
  EXPECT_EQ(autocorr_csv(0.5, {0}, {c}), "lag_time,re_1,im_1,abs_1\n0,1,0,1\n0.5,0.6,0.8,1\n");
  EXPECT_THROW(autocorr_csv(0.5, {0, 1}, {c}), Error);
}
