#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "koopgen/dynamics.hpp"
#include "koopgen/error.hpp"
#include "oracle.hpp"

using namespace koopgen;

namespace {

constexpr double kPi = std::numbers::pi;

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

double angle_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 2.0 * kPi);
  return std::min(d, 2.0 * kPi - d);
}

}  // namespace

TEST(VectorField, LorenzFixedPointAtOrigin) {
  EXPECT_EQ(vector_field(FlowSystem::lorenz63(), v3(0, 0, 0)), v3(0, 0, 0));
}

TEST(VectorField, LorenzAtOnes) {
  const Vec v = vector_field(FlowSystem::lorenz63(), v3(1, 1, 1));
  EXPECT_DOUBLE_EQ(v[0], 0.0);
  EXPECT_DOUBLE_EQ(v[1], 26.0);
  EXPECT_NEAR(v[2], -5.0 / 3.0, 1e-15);
}

TEST(VectorField, LorenzDefaults) {
  const auto s = FlowSystem::lorenz63();
  EXPECT_EQ(s.sigma, 10.0);
  EXPECT_EQ(s.rho, 28.0);
  EXPECT_EQ(s.beta, 8.0 / 3.0);
  EXPECT_EQ(s.state_dim(), 3);
  EXPECT_EQ(s.data_dim(), 3);
}

TEST(VectorField, StepanoffFixedPoint) {
  EXPECT_EQ(vector_field(FlowSystem::stepanoff(), v2(0, 0)), v2(0, 0));
}

TEST(VectorField, StepanoffAtPiPi) {
  const double a = FlowSystem::default_alpha();
  const Vec v = vector_field(FlowSystem::stepanoff(), v2(kPi, kPi));
  EXPECT_NEAR(v[0], 2.0 * (1.0 - a), 1e-14);
  EXPECT_NEAR(v[1], 0.0, 1e-14);
}

TEST(VectorField, NonFiniteInputRejected) {
  try {
    vector_field(FlowSystem::lorenz63(), v3(NAN, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
}

TEST(VectorField, RotationFrequencyMatchesPeriod) {
  // 2 pi / alpha is about 1.15.
  EXPECT_NEAR(2.0 * kPi / FlowSystem::default_alpha(), 1.1471, 1e-4);
}

TEST(Divergence, StepanoffVanishesOnLattice) {
  const auto s = FlowSystem::stepanoff();
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      const Mat jac = vector_field_jacobian(s, v2(2 * kPi * i / 32, 2 * kPi * j / 32));
      EXPECT_LE(std::abs(jac.trace()), 1e-12);
    }
  }
}

TEST(Divergence, LorenzIsConstant) {
  const auto s = FlowSystem::lorenz63();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 100; ++i) {
    const Mat jac = vector_field_jacobian(s, v3(u(rng), u(rng), u(rng) + 20));
    EXPECT_NEAR(jac.trace(), -41.0 / 3.0, 1e-12);
    EXPECT_NEAR(jac.trace(), oracle::lorenz_divergence(s.sigma, s.beta), 1e-12);
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  for (auto sys : {FlowSystem::stepanoff(), FlowSystem::lorenz63()}) {
    for (int t = 0; t < 10; ++t) {
      Vec x(sys.state_dim());
      for (Index i = 0; i < x.size(); ++i) x[i] = u(rng);
      const Mat jac = vector_field_jacobian(sys, x);
      for (Index c = 0; c < x.size(); ++c) {
        Vec xp = x, xm = x;
        xp[c] += 1e-6;
        xm[c] -= 1e-6;
        const Vec fd = (vector_field(sys, xp) - vector_field(sys, xm)) / 2e-6;
        EXPECT_LE((fd - jac.col(c)).norm(), 1e-6 * (1.0 + jac.col(c).norm()));
      }
    }
  }
}

TEST(ExactFlow, FullTurnOfFirstAngle) {
  const double a = FlowSystem::default_alpha();
  const Vec x = exact_flow_torus(a, v2(0, 0), 2 * kPi);
  EXPECT_LE(angle_gap(x[0], 0.0), 1e-12);
  EXPECT_NEAR(x[1], std::fmod(2 * kPi * a, 2 * kPi), 1e-12);
}

TEST(ExactFlow, IdentityAtZeroTime) {
  EXPECT_EQ(exact_flow_torus(3.0, v2(1, 1), 0.0), v2(1, 1));
}

TEST(ExactFlow, UnitTime) {
  const Vec x = exact_flow_torus(std::sqrt(30.0), v2(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_NEAR(x[1], 5.477225575051661, 1e-12);
}

TEST(ExactFlow, UnsupportedForOtherSystems) {
  try {
    exact_flow(FlowSystem::stepanoff(), v2(0, 0), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupported);
  }
}

TEST(ExactFlow, GroupProperty) {
  const double a = FlowSystem::default_alpha();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50), ang(0, 2 * kPi);
  for (int i = 0; i < 200; ++i) {
    const Vec x = v2(ang(rng), ang(rng));
    const double s = u(rng), t = u(rng);
    const Vec lhs = exact_flow_torus(a, exact_flow_torus(a, x, t), s);
    const Vec rhs = exact_flow_torus(a, x, s + t);
    for (int c = 0; c < 2; ++c) EXPECT_LE(angle_gap(lhs[c], rhs[c]), 1e-12);
  }
}

TEST(Rk4, FixedPointsPreserved) {
  EXPECT_EQ(integrate_rk4(FlowSystem::lorenz63(), v3(0, 0, 0), 0.01, 500), v3(0, 0, 0));
  EXPECT_EQ(integrate_rk4(FlowSystem::stepanoff(), v2(0, 0), 0.01, 500), v2(0, 0));
}

TEST(Rk4, StepHalvingAgreement) {
  const auto s = FlowSystem::lorenz63();
  const Vec a = integrate_rk4(s, v3(1, 1, 1), 1e-3, 1000);
  const Vec b = integrate_rk4(s, v3(1, 1, 1), 5e-4, 2000);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Rk4, FourthOrderConvergence) {
  const auto s = FlowSystem::lorenz63();
  const Vec x0 = v3(1, 1, 1);
  const Vec ref = integrate_rk4(s, x0, 0.5 / 4096, 4096);
  const double e1 = (integrate_rk4(s, x0, 0.5 / 64, 64) - ref).norm();
  const double e2 = (integrate_rk4(s, x0, 0.5 / 128, 128) - ref).norm();
  const double ratio = e1 / e2;
  EXPECT_GT(ratio, 8.0);
  EXPECT_LT(ratio, 24.0);
}

TEST(Rk4, RotationMatchesExactFlow) {
  const auto s = FlowSystem::torus_rotation();
  const Vec x = integrate_rk4(s, v2(0.3, 0.2), 0.01, 300);
  const Vec e = exact_flow(s, v2(0.3, 0.2), 3.0);
  for (int c = 0; c < 2; ++c) EXPECT_LE(angle_gap(x[c], e[c]), 1e-10);
}

TEST(Rk4, DivergenceGuard) {
  auto s = FlowSystem::lorenz63();
  s.escape_radius = 5.0;
  try {
    integrate_rk4(s, v3(1, 1, 1), 0.01, 10000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
}

TEST(Rk4, RejectsNonPositiveStep) {
  EXPECT_THROW(integrate_rk4(FlowSystem::lorenz63(), v3(1, 1, 1), 0.0, 3), Error);
}

TEST(Substeps, InternalStepBound) {
  EXPECT_EQ(auto_substeps(3.0), 300);
  EXPECT_EQ(auto_substeps(0.01), 1);
  EXPECT_EQ(auto_substeps(std::sqrt(7.0)), 265);
  for (double dt : {0.013, 0.5, 2.0, 2.6457}) EXPECT_LE(dt / auto_substeps(dt), 0.01);
}

TEST(Dataset, TorusSamples) {
  const double a = FlowSystem::default_alpha();
  const auto d = generate_dataset(FlowSystem::torus_rotation(), v2(0, 0), 3, 1.0, 0, 1);
  ASSERT_EQ(d.size(), 3);
  for (int n = 0; n < 3; ++n) {
    EXPECT_LE(angle_gap(d.states(n, 0), n), 1e-12);
    EXPECT_LE(angle_gap(d.states(n, 1), n * a), 1e-12);
  }
}

TEST(Dataset, SpinupDropsLeadingSamples) {
  for (auto sys : {FlowSystem::torus_rotation(), FlowSystem::stepanoff(), FlowSystem::lorenz63()}) {
    const Vec x0 = random_initial_state(sys, 5);
    const auto full = generate_dataset(sys, x0, 12, 0.05, 0, 5);
    const auto cut = generate_dataset(sys, x0, 8, 0.05, 4, 5);
    EXPECT_EQ(cut.spinup_discarded, 4);
    EXPECT_LE((cut.states.row(0) - full.states.row(4)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Dataset, EmbeddingsMatchStatesExactly) {
  for (auto sys : {FlowSystem::torus_rotation(), FlowSystem::stepanoff(), FlowSystem::lorenz63()}) {
    const auto d = generate_dataset(sys, random_initial_state(sys, 9), 50, 0.7, 3, 70);
    for (Index n = 0; n < d.size(); ++n) {
      const Vec y = embed(sys, d.states.row(n).transpose());
      EXPECT_TRUE((y.transpose().array() == d.embedded.row(n).array()).all());
    }
  }
}

TEST(Dataset, TorusStatesWrapped) {
  const auto d = generate_dataset(FlowSystem::stepanoff(), v2(6.2, 6.2), 100, 0.5, 0, 50);
  EXPECT_GE(d.states.minCoeff(), 0.0);
  EXPECT_LT(d.states.maxCoeff(), 2 * kPi);
}

TEST(Dataset, RejectsBadArguments) {
  const auto s = FlowSystem::lorenz63();
  EXPECT_THROW(generate_dataset(s, v3(1, 1, 1), 1, 0.1, 0, 1), Error);
  EXPECT_THROW(generate_dataset(s, v3(1, 1, 1), 5, 0.0, 0, 1), Error);
  EXPECT_THROW(generate_dataset(s, v3(1, 1, 1), 5, 0.1, 0, 0), Error);
}

TEST(Embedding, FlatTorus) {
  const Vec y = embed(FlowSystem::torus_rotation(), v2(0, 0));
  EXPECT_EQ(y, (Vec(4) << 1, 0, 1, 0).finished());
}

TEST(Embedding, RotationPushforwardAtOrigin) {
  const double a = FlowSystem::default_alpha();
  const Vec w = pushforward_vector(FlowSystem::torus_rotation(), v2(0, 0));
  EXPECT_LE((w - (Vec(4) << 0, 1, 0, a).finished()).norm(), 1e-15);
}

TEST(Embedding, LorenzIdentity) {
  EXPECT_EQ(embed(FlowSystem::lorenz63(), v3(1, 2, 3)), v3(1, 2, 3));
  EXPECT_EQ(pushforward_vector(FlowSystem::lorenz63(), v3(1, 2, 3)),
            vector_field(FlowSystem::lorenz63(), v3(1, 2, 3)));
}

TEST(Embedding, PushforwardIsChainRule) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ang(0, 2 * kPi);
  for (auto sys : {FlowSystem::torus_rotation(), FlowSystem::stepanoff()}) {
    for (int i = 0; i < 20; ++i) {
      const Vec x = v2(ang(rng), ang(rng));
      const Vec v = vector_field(sys, x);
      const double h = 1e-6;
      const Vec fd = (embed(sys, x + h * v) - embed(sys, x - h * v)) / (2 * h);
      EXPECT_LE((fd - pushforward_vector(sys, x)).norm(), 1e-8 * (1 + v.norm()));
    }
  }
}

TEST(DatasetIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "koopgen_dataset_io";
  std::filesystem::create_directories(dir);
  const auto sys = FlowSystem::lorenz63();
  const auto d = generate_dataset(sys, random_initial_state(sys, 4), 20, 0.3, 2, 30);
  write_dataset(dir / "d.csv", d, {sys, 20, 0.3, 2, 4});
  DatasetManifest m;
  const auto back = read_dataset(dir / "d.csv", &m);
  EXPECT_EQ(back.states, d.states);
  EXPECT_EQ(back.embedded, d.embedded);
  EXPECT_EQ(back.dt, 0.3);
  EXPECT_EQ(m.system.kind, SystemKind::kLorenz63);
  EXPECT_EQ(m.seed, 4u);
  EXPECT_EQ(m.spinup, 2);
  std::filesystem::remove_all(dir);
}

TEST(SystemKindNames, ParseAndPrint) {
  for (auto k : {SystemKind::kTorusRotation, SystemKind::kStepanoff, SystemKind::kLorenz63}) {
    EXPECT_EQ(parse_system_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_system_kind("duffing"), Error);
}
