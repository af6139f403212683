#include "koopgen/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "koopgen/error.hpp"
#include "koopgen/io.hpp"

namespace koopgen {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::kValidation,
              "bad value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  bad_value(key, value);
}

std::vector<std::int64_t> parse_list(std::string_view key, std::string_view value) {
  std::vector<std::int64_t> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (item.empty()) bad_value(key, value);
    out.push_back(parse_number<std::int64_t>(key, item));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

std::string list_text(const std::vector<std::int64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

struct Key {
  const char* doc;
  std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define KOOPGEN_DOUBLE(field)                                                     \
  [](PipelineConfig& c, std::string_view k, std::string_view v) {                 \
    c.field = parse_number<double>(k, v);                                         \
  },                                                                              \
      [](const PipelineConfig& c) { return io::format_double(c.field); }
#define KOOPGEN_INT(field, type)                                                  \
  [](PipelineConfig& c, std::string_view k, std::string_view v) {                 \
    c.field = parse_number<type>(k, v);                                           \
  },                                                                              \
      [](const PipelineConfig& c) { return std::to_string(c.field); }
#define KOOPGEN_BOOL(field)                                                       \
  [](PipelineConfig& c, std::string_view k, std::string_view v) {                 \
    c.field = parse_bool(k, v);                                                   \
  },                                                                              \
      [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }

// Ordered as written by serialize_config.
const std::vector<std::pair<std::string, Key>>& key_table() {
  static const std::vector<std::pair<std::string, Key>> table = {
      {"system",
       {"torus | stepanoff | lorenz63",
        [](PipelineConfig& c, std::string_view, std::string_view v) {
          c.system = parse_system_kind(v);
        },
        [](const PipelineConfig& c) { return std::string(to_string(c.system)); }}},
      {"alpha", {"torus frequency parameter", KOOPGEN_DOUBLE(alpha)}},
      {"sigma", {"Lorenz sigma", KOOPGEN_DOUBLE(sigma)}},
      {"rho", {"Lorenz rho", KOOPGEN_DOUBLE(rho)}},
      {"beta", {"Lorenz beta", KOOPGEN_DOUBLE(beta)}},
      {"N", {"training samples", KOOPGEN_INT(N, std::int64_t)}},
      {"dt", {"training sampling interval [time]", KOOPGEN_DOUBLE(dt)}},
      {"spinup", {"discarded samples before recording [samples of dt]", KOOPGEN_INT(spinup, std::int64_t)}},
      {"substeps", {"RK4 steps per sample, 0 = auto (step <= 0.01)", KOOPGEN_INT(substeps, int)}},
      {"seed", {"initial condition seed", KOOPGEN_INT(seed, std::uint64_t)}},
      {"grid_points", {"bandwidth tuning grid size", KOOPGEN_INT(kernel.grid_points, int)}},
      {"grid_log2_min", {"smallest eps^2 / median squared distance [log2]", KOOPGEN_DOUBLE(kernel.grid_log2_min)}},
      {"grid_log2_max", {"largest eps^2 / median squared distance [log2]", KOOPGEN_DOUBLE(kernel.grid_log2_max)}},
      {"median_subsample", {"points used for the median distance", KOOPGEN_INT(kernel.median_subsample, Index)}},
      {"pilot_exponent", {"bandwidth = density^pilot_exponent", KOOPGEN_DOUBLE(kernel.pilot_exponent)}},
      {"L", {"eigenproblem dimension, even", KOOPGEN_INT(L, std::int64_t)}},
      {"z", {"resolvent parameter", KOOPGEN_DOUBLE(z)}},
      {"tau", {"diffusion regularization [time]", KOOPGEN_DOUBLE(tau)}},
      {"test_N", {"test samples", KOOPGEN_INT(test_N, std::int64_t)}},
      {"test_dt", {"test sampling interval [time]", KOOPGEN_DOUBLE(test_dt)}},
      {"test_seed", {"test initial condition seed", KOOPGEN_INT(test_seed, std::uint64_t)}},
      {"select",
       {"exported modes, 1-based in energy order; empty = first 10",
        [](PipelineConfig& c, std::string_view k, std::string_view v) {
          c.select = parse_list(k, v);
        },
        [](const PipelineConfig& c) { return list_text(c.select); }}},
      {"max_lag", {"autocorrelation window [time]", KOOPGEN_DOUBLE(max_lag)}},
      {"output_dir",
       {"artifact directory",
        [](PipelineConfig& c, std::string_view, std::string_view v) {
          c.output_dir = std::string(v);
        },
        [](const PipelineConfig& c) { return c.output_dir; }}},
      {"cache", {"reuse artifacts whose inputs are unchanged", KOOPGEN_BOOL(cache)}},
      {"dump_matrices", {"also write V, A, B as dense CSV", KOOPGEN_BOOL(dump_matrices)}},
  };
  return table;
}

#undef KOOPGEN_DOUBLE
#undef KOOPGEN_INT
#undef KOOPGEN_BOOL

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::kValidation, message);
}

}  // namespace

FlowSystem PipelineConfig::flow_system() const {
  switch (system) {
    case SystemKind::kTorusRotation: return FlowSystem::torus_rotation(alpha);
    case SystemKind::kStepanoff: return FlowSystem::stepanoff(alpha);
    case SystemKind::kLorenz63: return FlowSystem::lorenz63(sigma, rho, beta);
  }
  return {};
}

int PipelineConfig::resolved_substeps() const {
  return substeps > 0 ? substeps : auto_substeps(dt);
}

int PipelineConfig::resolved_test_substeps() const {
  return substeps > 0 ? std::max(1, static_cast<int>(std::ceil(substeps * test_dt / dt)))
                      : auto_substeps(test_dt);
}

std::int64_t PipelineConfig::test_spinup() const {
  return static_cast<std::int64_t>(std::ceil(static_cast<double>(spinup) * dt / test_dt - 1e-9));
}

std::int64_t PipelineConfig::max_lag_steps() const {
  return std::llround(max_lag / test_dt);
}

std::vector<Index> PipelineConfig::selected_indices() const {
  std::vector<Index> out;
  if (select.empty()) {
    for (Index j = 0; j < std::min<Index>(10, L); ++j) out.push_back(j);
  } else {
    for (auto j : select) out.push_back(static_cast<Index>(j - 1));
  }
  return out;
}

PipelineConfig default_config(SystemKind system) {
  PipelineConfig c;
  c.system = system;
  c.z = 0.1;
  c.test_N = 2000;
  c.test_dt = 0.01;
  switch (system) {
    case SystemKind::kTorusRotation:
      c.N = 60000;
      c.dt = std::sqrt(7.0);
      c.tau = 3e-3;
      c.L = 400;
      c.spinup = 0;
      break;
    case SystemKind::kStepanoff:
      c.N = 60000;
      c.dt = 2.0;
      c.tau = 5e-5;
      c.L = 800;
      c.spinup = 0;
      break;
    case SystemKind::kLorenz63:
      c.N = 80000;
      c.dt = 3.0;
      c.tau = 1e-5;
      c.L = 1000;
      c.spinup = 1000;
      break;
  }
  return c;
}

void apply_desk_preset(PipelineConfig& config) {
  config.N = 5000;
  config.L = 50;
  config.test_N = 1000;
  // The shorter test trajectory spans 10 time units.
  config.max_lag = 5.0;
}

void validate(const PipelineConfig& c) {
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(c.alpha), "alpha must be finite");
  if (c.system == SystemKind::kLorenz63) {
    require(c.sigma > 0 && c.rho > 0 && c.beta > 0 && finite(c.sigma) && finite(c.rho) &&
                finite(c.beta),
            "Lorenz parameters must be positive");
  }
  require(c.N >= 2, "N must be at least 2");
  require(c.dt > 0 && finite(c.dt), "dt must be positive");
  require(c.spinup >= 0, "spinup must be non-negative");
  require(c.substeps >= 0, "substeps must be non-negative");
  require(c.kernel.grid_points >= 16, "grid_points must be at least 16");
  require(c.kernel.grid_log2_min < c.kernel.grid_log2_max, "tuning grid must be increasing");
  require(c.kernel.median_subsample >= 2, "median_subsample must be at least 2");
  require(finite(c.kernel.pilot_exponent), "pilot_exponent must be finite");
  require(c.L >= 2, "L must be at least 2");
  require(c.L % 2 == 0, "L must be even (got " + std::to_string(c.L) + ")");
  require(c.L + 1 <= c.N, "L + 1 must not exceed N");
  require(c.z > 0 && finite(c.z), "z must be positive");
  require(c.tau >= 0 && finite(c.tau), "tau must be non-negative");
  require(c.test_N >= 2, "test_N must be at least 2");
  require(c.test_dt > 0 && finite(c.test_dt), "test_dt must be positive");
  for (auto j : c.select) {
    require(j >= 1 && j <= c.L, "select entries must lie in 1..L (got " + std::to_string(j) + ")");
  }
  require(c.max_lag > 0 && finite(c.max_lag), "max_lag must be positive");
  require(c.max_lag_steps() >= 1, "max_lag is shorter than test_dt");
  require(c.max_lag_steps() <= c.test_N,
          "max_lag needs " + std::to_string(c.max_lag_steps()) +
              " lags but the test trajectory has " + std::to_string(c.test_N) + " samples");
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  for (const auto& [name, entry] : key_table()) {
    if (name == key) {
      entry.set(config, key, trim(value));
      return;
    }
  }
  throw Error(ErrorKind::kValidation, "unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& entry : key_table()) out.push_back(entry.first);
  return out;
}

PipelineConfig parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::kValidation,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.emplace_back(std::string(trim(body.substr(0, eq))),
                         std::string(trim(body.substr(eq + 1))));
  }
  SystemKind system = SystemKind::kTorusRotation;
  for (const auto& [k, v] : entries) {
    if (k == "system") system = parse_system_kind(v);
  }
  PipelineConfig config = default_config(system);
  for (const auto& [k, v] : entries) set_config_value(config, k, v);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_text(path));
}

std::string serialize_config(const PipelineConfig& config) {
  std::string text;
  for (const auto& [name, entry] : key_table()) {
    text += "# ";
    text += entry.doc;
    text += '\n';
    text += name + " = " + entry.get(config) + '\n';
  }
  return text;
}

}  // namespace koopgen
