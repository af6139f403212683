#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "koopgen/config.hpp"
#include "koopgen/error.hpp"

using namespace koopgen;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

}  // namespace

TEST(Config, FullScaleDefaults) {
  const auto t = default_config(SystemKind::kTorusRotation);
  EXPECT_EQ(t.N, 60000);
  EXPECT_DOUBLE_EQ(t.dt, std::sqrt(7.0));
  EXPECT_EQ(t.L, 400);
  EXPECT_DOUBLE_EQ(t.z, 0.1);
  EXPECT_DOUBLE_EQ(t.tau, 3e-3);
  EXPECT_DOUBLE_EQ(t.alpha, std::sqrt(30.0));
  EXPECT_NO_THROW(validate(t));

  const auto s = default_config(SystemKind::kStepanoff);
  EXPECT_EQ(s.L, 800);
  EXPECT_DOUBLE_EQ(s.tau, 5e-5);
  EXPECT_NO_THROW(validate(s));

  const auto l = default_config(SystemKind::kLorenz63);
  EXPECT_EQ(l.N, 80000);
  EXPECT_EQ(l.L, 1000);
  EXPECT_DOUBLE_EQ(l.tau, 1e-5);
  EXPECT_GT(l.spinup, 0);
  EXPECT_NO_THROW(validate(l));
  for (const auto& c : {t, s, l}) {
    EXPECT_EQ(c.test_N, 2000);
    EXPECT_DOUBLE_EQ(c.test_dt, 0.01);
    EXPECT_EQ(c.max_lag_steps(), 2000);
    EXPECT_LE(c.dt / c.resolved_substeps(), 0.01 + 1e-15);
  }
}

TEST(Config, DeskPreset) {
  auto c = default_config(SystemKind::kLorenz63);
  apply_desk_preset(c);
  EXPECT_EQ(c.N, 5000);
  EXPECT_EQ(c.L, 50);
  EXPECT_EQ(c.test_N, 1000);
  EXPECT_DOUBLE_EQ(c.tau, 1e-5);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, RoundTrip) {
  for (auto kind : {SystemKind::kTorusRotation, SystemKind::kStepanoff, SystemKind::kLorenz63}) {
    auto c = default_config(kind);
    c.N = 1234;
    c.tau = 0.1 + 0.2;  // not exactly representable in short decimal
    c.select = {1, 4, 7};
    c.output_dir = "runs/with space";
    c.kernel.pilot_exponent = -0.37;
    c.cache = false;
    c.dump_matrices = true;
    EXPECT_EQ(parse_config(serialize_config(c)), c) << serialize_config(c);
  }
}

TEST(Config, SerializedKeysDocumented) {
  const std::string text = serialize_config(default_config(SystemKind::kStepanoff));
  for (const auto& key : config_keys()) {
    EXPECT_NE(text.find("\n" + key + " = "), std::string::npos) << key;
  }
  EXPECT_NE(text.find('#'), std::string::npos);
}

TEST(Config, ParseCommentsAndDefaults) {
  const auto c = parse_config("# a comment\nsystem = lorenz63\n\nL = 20 \nN=500\n");
  EXPECT_EQ(c.system, SystemKind::kLorenz63);
  EXPECT_EQ(c.L, 20);
  EXPECT_EQ(c.N, 500);
  EXPECT_DOUBLE_EQ(c.tau, 1e-5);
}

TEST(Config, ValidationErrors) {
  auto odd = default_config(SystemKind::kTorusRotation);
  odd.L = 51;
  EXPECT_EQ(kind_of([&] { validate(odd); }), ErrorKind::kValidation);
  auto bad_z = default_config(SystemKind::kTorusRotation);
  bad_z.z = 0.0;
  EXPECT_EQ(kind_of([&] { validate(bad_z); }), ErrorKind::kValidation);
  auto bad_tau = default_config(SystemKind::kTorusRotation);
  bad_tau.tau = -1.0;
  EXPECT_EQ(kind_of([&] { validate(bad_tau); }), ErrorKind::kValidation);
  auto too_big = default_config(SystemKind::kTorusRotation);
  too_big.N = 100;
  EXPECT_EQ(kind_of([&] { validate(too_big); }), ErrorKind::kValidation);
  auto lag = default_config(SystemKind::kTorusRotation);
  lag.test_N = 100;
  EXPECT_EQ(kind_of([&] { validate(lag); }), ErrorKind::kValidation);
  auto sel = default_config(SystemKind::kTorusRotation);
  sel.select = {0};
  EXPECT_EQ(kind_of([&] { validate(sel); }), ErrorKind::kValidation);
}

TEST(Config, SetValueErrors) {
  auto c = default_config(SystemKind::kTorusRotation);
  EXPECT_EQ(kind_of([&] { set_config_value(c, "nonsense", "1"); }), ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] { set_config_value(c, "N", "12x"); }), ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] { set_config_value(c, "system", "pendulum"); }), ErrorKind::kValidation);
  EXPECT_EQ(kind_of([&] { parse_config("L 40\n"); }), ErrorKind::kValidation);
  set_config_value(c, "select", "2,3");
  EXPECT_EQ(c.selected_indices(), (std::vector<Index>{1, 2}));
}

TEST(Config, SelectionDefault) {
  auto c = default_config(SystemKind::kTorusRotation);
  EXPECT_EQ(c.selected_indices().size(), 10u);
  c.L = 4;
  EXPECT_EQ(c.selected_indices(), (std::vector<Index>{0, 1, 2, 3}));
}

TEST(Config, TestSpinupCoversTrainingSpinupTime) {
  const auto c = default_config(SystemKind::kLorenz63);
  EXPECT_GE(static_cast<double>(c.test_spinup()) * c.test_dt, static_cast<double>(c.spinup) * c.dt - 1e-9);
}
