#pragma once

// Flat key-value run configuration, command dispatch and artifact writers.
// Data files depend only on (config, seed); wall-clock fields live in the
// manifest alone.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mildheat/convergence_lab.hpp"
#include "mildheat/errors.hpp"
#include "mildheat/mild_solver.hpp"
#include "mildheat/noise_fields.hpp"
#include "mildheat/numfmt.hpp"

namespace mildheat {

inline constexpr const char* tool_version = "0.1.0";

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c{"solve",        "solve-smoothed", "sample-noise", "study-mollify",
                                          "study-cauchy", "study-lemma3",   "study-kernel", "study-hrange"};
  return c;
}

struct RunConfig {
  std::string command = "solve";
  double hurst_H = 0.0;    // required
  double alpha = 0.0;      // required
  double horizon_T = 0.0;  // required
  std::size_t modes_M = 64;
  std::size_t noise_modes_J = 16;
  std::size_t steps_K = 4096;
  std::size_t mollify_rate_n = 64;
  double stop_level_N = 100.0;
  std::size_t replicates_R = 200;
  std::uint64_t seed = 1;
  std::string f_kind = "sine";
  std::vector<double> f_params{0.5, 1.0, 0.0};
  std::string g_kind = "constant";
  std::vector<double> g_params{0.1};
  double h_slope = 0.5;
  double h_offset = 0.2;
  std::vector<double> init_coeffs{1.0, 0.5};  // padded with zeros to M
  std::string diffusivity_kind = "constant";
  std::vector<double> diffusivity_params{1.0};
  double lambda0 = 1.0;
  double lambda_decay_p = 2.0;
  double mu0 = 1.0;
  double mu_decay_q = 3.0;
  std::vector<double> ladder{16, 32, 64, 128, 256};
  std::vector<double> hurst_ladder{0.60, 0.70, 0.75, 0.85};
  std::optional<double> lemma3_R;  // absent: 90th percentile of observed Besov norms
  double epsilon = 0.05;
  std::size_t besov_stride = 1;
  std::size_t seminorm_stride = 1;
  std::size_t kernel_rungs = 9;
  std::string wiener_weighting = "variance_matched";
  std::string noise_kind = "fbm";
  std::string output_dir = "out";
  std::string format = "json";
  bool exploratory = false;

  double time_step() const { return horizon_T / static_cast<double>(steps_K); }
  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] inline void malformed(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(ConfigErrorKind::malformed_value, key,
                    "config: key '" + key + "' has malformed value '" + value + "' (expected " + expected + ")");
}

[[noreturn]] inline void out_of_range(const std::string& key, const std::string& what) {
  throw ConfigError(ConfigErrorKind::out_of_range, key, "config: key '" + key + "' out of range: " + what);
}

inline double parse_number(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x)) malformed(key, v, "a finite number");
  return x;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) malformed(key, v, "a nonnegative integer");
  return x;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  malformed(key, v, "true or false");
}

inline std::string list_string(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

struct KeySpec {
  std::string name;
  bool required = false;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
KeySpec number_key(std::string name, T RunConfig::*field, bool required = false) {
  KeySpec k;
  k.name = name;
  k.required = required;
  k.set = [name, field](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, double>) c.*field = parse_number(name, v);
    else c.*field = static_cast<T>(parse_unsigned(name, v));
  };
  k.get = [field](const RunConfig& c) {
    if constexpr (std::is_same_v<T, double>) return format_double(c.*field);
    else return std::to_string(c.*field);
  };
  return k;
}

inline KeySpec string_key(std::string name, std::string RunConfig::*field) {
  return {name, false, [field](RunConfig& c, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }};
}

inline KeySpec list_key(std::string name, std::vector<double> RunConfig::*field) {
  return {name, false, [name, field](RunConfig& c, const std::string& v) { c.*field = parse_list(name, v); },
          [field](const RunConfig& c) { return list_string(c.*field); }};
}

/// Keys in serialization order.
inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    t.push_back(string_key("command", &RunConfig::command));
    t.push_back(number_key("hurst_H", &RunConfig::hurst_H, true));
    t.push_back(number_key("alpha", &RunConfig::alpha, true));
    t.push_back(number_key("horizon_T", &RunConfig::horizon_T, true));
    t.push_back(number_key("modes_M", &RunConfig::modes_M));
    t.push_back(number_key("noise_modes_J", &RunConfig::noise_modes_J));
    t.push_back(number_key("steps_K", &RunConfig::steps_K));
    t.push_back(number_key("mollify_rate_n", &RunConfig::mollify_rate_n));
    t.push_back(number_key("stop_level_N", &RunConfig::stop_level_N));
    t.push_back(number_key("replicates_R", &RunConfig::replicates_R));
    t.push_back(number_key("seed", &RunConfig::seed));
    t.push_back(string_key("f_kind", &RunConfig::f_kind));
    t.push_back(list_key("f_params", &RunConfig::f_params));
    t.push_back(string_key("g_kind", &RunConfig::g_kind));
    t.push_back(list_key("g_params", &RunConfig::g_params));
    t.push_back(number_key("h_slope", &RunConfig::h_slope));
    t.push_back(number_key("h_offset", &RunConfig::h_offset));
    t.push_back(list_key("init_coeffs", &RunConfig::init_coeffs));
    t.push_back(string_key("diffusivity_kind", &RunConfig::diffusivity_kind));
    t.push_back(list_key("diffusivity_params", &RunConfig::diffusivity_params));
    t.push_back(number_key("lambda0", &RunConfig::lambda0));
    t.push_back(number_key("lambda_decay_p", &RunConfig::lambda_decay_p));
    t.push_back(number_key("mu0", &RunConfig::mu0));
    t.push_back(number_key("mu_decay_q", &RunConfig::mu_decay_q));
    t.push_back(list_key("ladder", &RunConfig::ladder));
    t.push_back(list_key("hurst_ladder", &RunConfig::hurst_ladder));
    t.push_back({"lemma3_R", false,
                 [](RunConfig& c, const std::string& v) {
                   if (v == "auto") c.lemma3_R.reset();
                   else c.lemma3_R = parse_number("lemma3_R", v);
                 },
                 [](const RunConfig& c) { return c.lemma3_R ? format_double(*c.lemma3_R) : std::string("auto"); }});
    t.push_back(number_key("epsilon", &RunConfig::epsilon));
    t.push_back(number_key("besov_stride", &RunConfig::besov_stride));
    t.push_back(number_key("seminorm_stride", &RunConfig::seminorm_stride));
    t.push_back(number_key("kernel_rungs", &RunConfig::kernel_rungs));
    t.push_back(string_key("wiener_weighting", &RunConfig::wiener_weighting));
    t.push_back(string_key("noise_kind", &RunConfig::noise_kind));
    t.push_back(string_key("output_dir", &RunConfig::output_dir));
    t.push_back(string_key("format", &RunConfig::format));
    t.push_back({"exploratory", false,
                 [](RunConfig& c, const std::string& v) { c.exploratory = parse_bool("exploratory", v); },
                 [](const RunConfig& c) { return std::string(c.exploratory ? "true" : "false"); }});
    return t;
  }();
  return table;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

inline std::size_t integer_rate(const std::string& key, double v) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) out_of_range(key, "rates must be positive integers");
  return static_cast<std::size_t>(v);
}

inline std::vector<std::size_t> rate_ladder(const RunConfig& c) {
  std::vector<std::size_t> out;
  for (double v : c.ladder) out.push_back(integer_rate("ladder", v));
  return out;
}

inline bool is_study(const std::string& command) { return command.rfind("study-", 0) == 0; }

inline void require_window(const RunConfig& c, const std::string& key, std::size_t rate) {
  if (c.time_step() * 4.0 * static_cast<double>(rate) > 1.0 + 1e-12)
    out_of_range(key, "mollification window unresolved at n = " + std::to_string(rate) +
                          ": need dt * 4n <= 1 with dt = horizon_T / steps_K = " + format_double(c.time_step()));
}

inline void validate_config(const RunConfig& c) {
  const auto& cmds = known_commands();
  if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end())
    throw ConfigError(ConfigErrorKind::unknown_command, "command", "config: unknown command '" + c.command + "'");
  const bool sampling = c.command == "sample-noise";
  if (!(c.horizon_T > 0.0)) out_of_range("horizon_T", "need horizon_T > 0");
  if (c.modes_M < 1) out_of_range("modes_M", "need modes_M >= 1");
  if (c.noise_modes_J < 1 || c.noise_modes_J > c.modes_M)
    out_of_range("noise_modes_J", "need 1 <= noise_modes_J <= modes_M = " + std::to_string(c.modes_M));
  if (c.steps_K < 2) out_of_range("steps_K", "need steps_K >= 2");
  if (sampling) {
    if (!(c.hurst_H > 0.0 && c.hurst_H < 1.0)) out_of_range("hurst_H", "sampling needs hurst_H in (0, 1)");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) out_of_range("alpha", "need alpha in (0, 1)");
  } else {
    if (!(c.hurst_H > 2.0 / 3.0 && c.hurst_H < 1.0))
      out_of_range("hurst_H", "need hurst_H in (2/3, 1); below 2/3 the interval (1 - H, 1/3) of admissible alpha is empty");
    if (!HolderExponent::admissible(c.alpha, c.hurst_H))
      out_of_range("alpha", "need alpha in (1 - H, 1/3) = (" + format_double(1.0 - c.hurst_H) + ", 1/3)");
  }
  if (!(c.lambda_decay_p > 1.0)) out_of_range("lambda_decay_p", "need p > 1 (sum of lambda_j diverges otherwise)");
  if (!(c.mu_decay_q > 2.0)) out_of_range("mu_decay_q", "need q > 2 (sum of mu_j^(1/2) diverges otherwise)");
  if (!(c.lambda0 >= 0.0)) out_of_range("lambda0", "need lambda0 >= 0");
  if (!(c.mu0 >= 0.0)) out_of_range("mu0", "need mu0 >= 0");
  if (c.mollify_rate_n < 1) out_of_range("mollify_rate_n", "need mollify_rate_n >= 1");
  require_window(c, "mollify_rate_n", c.mollify_rate_n);
  if (!(c.stop_level_N >= 1.0)) out_of_range("stop_level_N", "need stop_level_N >= 1");
  if (c.init_coeffs.size() > c.modes_M)
    out_of_range("init_coeffs", "at most modes_M = " + std::to_string(c.modes_M) + " coefficients");
  if (c.besov_stride < 1 || c.steps_K % c.besov_stride != 0 || c.steps_K / c.besov_stride < 2)
    out_of_range("besov_stride", "need a divisor of steps_K leaving >= 2 intervals");
  if (c.seminorm_stride < 1) out_of_range("seminorm_stride", "need seminorm_stride >= 1");
  if (!(c.epsilon > 0.0)) out_of_range("epsilon", "need epsilon > 0");
  if (c.lemma3_R && !(*c.lemma3_R > 0.0)) out_of_range("lemma3_R", "need lemma3_R > 0 or auto");
  if (c.wiener_weighting != "variance_matched" && c.wiener_weighting != "left_point")
    out_of_range("wiener_weighting", "one of variance_matched, left_point");
  if (c.noise_kind != "fbm" && c.noise_kind != "wiener") out_of_range("noise_kind", "one of fbm, wiener");
  if (c.format != "json" && c.format != "csv") out_of_range("format", "one of json, csv");
  if (c.output_dir.empty()) out_of_range("output_dir", "must not be empty");
  try {
    (void)ScalarCoefficient::from_kind(c.f_kind, c.f_params);
  } catch (const DomainError& e) {
    out_of_range("f_kind", e.what());
  }
  try {
    (void)ScalarCoefficient::from_kind(c.g_kind, c.g_params);
  } catch (const DomainError& e) {
    out_of_range("g_kind", e.what());
  }
  try {
    const auto k = Diffusivity::from_kind(c.diffusivity_kind, c.diffusivity_params);
    (void)k.integral(0.0, c.horizon_T, 64, 64.0);
  } catch (const DomainError& e) {
    out_of_range("diffusivity_kind", e.what());
  }
  if (is_study(c.command) && c.command != "study-kernel") {
    if (c.ladder.empty()) out_of_range("ladder", "must not be empty");
    const auto rates = rate_ladder(c);
    for (std::size_t i = 1; i < rates.size(); ++i)
      if (rates[i] <= rates[i - 1]) out_of_range("ladder", "must be strictly increasing");
    const bool doubled = c.command != "study-mollify";
    require_window(c, "ladder", doubled ? 2 * rates.back() : rates.back());
    if (c.replicates_R < 1) out_of_range("replicates_R", "need replicates_R >= 1");
    if (c.replicates_R < 100 && !c.exploratory)
      out_of_range("replicates_R", "statistical studies need replicates_R >= 100 (set exploratory = true to override)");
  }
  if (c.command == "study-kernel") {
    if (c.kernel_rungs < 5) out_of_range("kernel_rungs", "kernel regression needs kernel_rungs >= 5");
    if (c.diffusivity_kind != "constant") out_of_range("diffusivity_kind", "study-kernel needs constant diffusivity");
  }
  if (c.command == "study-hrange") {
    if (c.hurst_ladder.empty()) out_of_range("hurst_ladder", "must not be empty");
    for (std::size_t i = 0; i < c.hurst_ladder.size(); ++i) {
      if (!(c.hurst_ladder[i] > 0.5 && c.hurst_ladder[i] < 1.0)) out_of_range("hurst_ladder", "every H in (1/2, 1)");
      if (i > 0 && c.hurst_ladder[i] <= c.hurst_ladder[i - 1]) out_of_range("hurst_ladder", "must be strictly increasing");
    }
  }
}

inline void apply_pair(RunConfig& c, std::set<std::string>& seen, const std::string& key, const std::string& value) {
  const auto* k = find_key(key);
  if (!k) throw ConfigError(ConfigErrorKind::unknown_key, key, "config: unknown key '" + key + "'");
  k->set(c, value);
  seen.insert(key);
}

}  // namespace detail

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines ('#' starts a comment), then applies overrides
/// in order. Defaults are materialized; the result is fully validated.
inline RunConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {}) {
  RunConfig c;
  std::set<std::string> seen, in_file;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(ConfigErrorKind::malformed_value, "",
                        "config: line " + std::to_string(lineno) + " is not of the form key = value");
    const auto key = detail::trim(std::string_view(body).substr(0, eq));
    const auto value = detail::trim(std::string_view(body).substr(eq + 1));
    if (!in_file.insert(key).second)
      throw ConfigError(ConfigErrorKind::malformed_value, key, "config: key '" + key + "' given twice");
    detail::apply_pair(c, seen, key, value);
  }
  for (const auto& [k, v] : overrides) detail::apply_pair(c, seen, detail::trim(k), detail::trim(v));
  for (const auto& k : detail::key_table())
    if (k.required && !seen.count(k.name)) {
      std::string range = k.name == "hurst_H" ? "(2/3, 1)" : k.name == "alpha" ? "(1 - H, 1/3)" : "(0, inf)";
      throw ConfigError(ConfigErrorKind::missing_key, k.name,
                        "config: missing required key '" + k.name + "' (admissible range " + range + ")");
    }
  detail::validate_config(c);
  return c;
}

/// One `key = value` line per key, every default included.
inline std::string serialize_config(const RunConfig& c) {
  std::string out;
  for (const auto& k : detail::key_table()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

/// Config echo as strings. Data files omit output_dir so that a rerun in a
/// different directory stays byte-identical; the manifest keeps it.
inline nlohmann::ordered_json config_json(const RunConfig& c, bool with_location = false) {
  nlohmann::ordered_json j;
  for (const auto& k : detail::key_table())
    if (with_location || k.name != "output_dir") j[k.name] = k.get(c);
  return j;
}

inline ProblemSpec problem_spec(const RunConfig& c) {
  ProblemSpec s;
  s.f = ScalarCoefficient::from_kind(c.f_kind, c.f_params);
  s.g = ScalarCoefficient::from_kind(c.g_kind, c.g_params);
  s.h = {c.h_slope, c.h_offset};
  std::vector<double> phi(c.modes_M, 0.0);
  std::copy(c.init_coeffs.begin(), c.init_coeffs.end(), phi.begin());
  s.initial = FieldVector(std::move(phi));
  s.diffusivity = Diffusivity::from_kind(c.diffusivity_kind, c.diffusivity_params);
  s.exponent = {c.alpha, c.hurst_H};
  s.horizon = c.horizon_T;
  s.qspec = QSpec::from_decay(c.noise_modes_J, {c.lambda0, c.lambda_decay_p, c.mu0, c.mu_decay_q});
  return s;
}

inline SolverOptions solver_options(const RunConfig& c) {
  SolverOptions o;
  o.wiener_weighting =
      c.wiener_weighting == "left_point" ? WienerWeighting::left_point : WienerWeighting::variance_matched;
  o.besov_stride = c.besov_stride;
  return o;
}

inline StudyKind study_kind(const std::string& command) {
  if (command == "study-mollify") return StudyKind::mollify;
  if (command == "study-cauchy") return StudyKind::cauchy;
  if (command == "study-lemma3") return StudyKind::lemma3;
  if (command == "study-kernel") return StudyKind::kernel;
  if (command == "study-hrange") return StudyKind::hrange;
  throw ConfigError(ConfigErrorKind::unknown_command, "command", "config: '" + command + "' is not a study command");
}

inline StudyConfig study_config(const RunConfig& c) {
  StudyConfig s;
  s.kind = study_kind(c.command);
  s.ladder = detail::rate_ladder(c);
  s.replicates = c.replicates_R;
  s.spec = problem_spec(c);
  s.steps = c.steps_K;
  s.level = c.stop_level_N;
  s.seed = c.seed;
  s.epsilon = c.epsilon;
  s.lemma3_R = c.lemma3_R;
  s.hurst_ladder = c.hurst_ladder;
  s.kernel_rungs = c.kernel_rungs;
  s.seminorm_stride = c.seminorm_stride;
  s.options = solver_options(c);
  s.exploratory = c.exploratory;
  return s;
}

// ----------------------------------------------------------------------------
// Writers

inline nlohmann::ordered_json solution_header(const SolutionPath& sol, const RunConfig& c) {
  nlohmann::ordered_json h;
  h["tool"] = "mildheat";
  h["version"] = tool_version;
  h["scheme"] = sol.meta.scheme;
  h["wiener_weighting"] = sol.meta.wiener_weighting;
  h["dt"] = sol.meta.dt;
  h["modes"] = sol.meta.modes;
  h["noise_modes"] = sol.meta.noise_modes;
  h["seed"] = sol.meta.seed;
  if (sol.meta.rate) h["rate"] = *sol.meta.rate;
  if (sol.meta.level) h["level"] = *sol.meta.level;
  if (sol.meta.stop_time) h["stop_time"] = *sol.meta.stop_time;
  h["besov"] = {{"norm", sol.ledger.norm}, {"sup_part", sol.ledger.sup_part}, {"j_part", sol.ledger.j_part}};
  h["spec"] = config_json(c);
  h["final_state"] = sol.final_state().coeffs;
  return h;
}

/// CSV body: t, c0, ..., c_{M-1}.
inline void write_solution_csv(std::ostream& os, const SolutionPath& sol) {
  os << "t";
  for (std::size_t j = 0; j < sol.meta.modes; ++j) os << ",c" << j;
  os << '\n';
  for (std::size_t k = 0; k < sol.states.size(); ++k) {
    os << format_double(sol.times[k]);
    for (double v : sol.states[k].coeffs) os << ',' << format_double(v);
    os << '\n';
  }
}

inline nlohmann::ordered_json solution_json(const SolutionPath& sol, const RunConfig& c) {
  nlohmann::ordered_json j;
  j["header"] = solution_header(sol, c);
  j["times"] = sol.times;
  auto states = nlohmann::ordered_json::array();
  for (const auto& s : sol.states) states.push_back(s.coeffs);
  j["states"] = states;
  return j;
}

struct RunResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> files;  // data files, manifest excluded
  std::filesystem::path directory;
  std::string message;
};

namespace detail {

inline std::filesystem::path output_directory(const RunConfig& c) {
  std::filesystem::path dir(c.output_dir);
  if (dir.is_relative())
    if (const char* root = std::getenv("MILDHEAT_OUTPUT_ROOT"); root && *root) dir = std::filesystem::path(root) / dir;
  return dir;
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  template <class Fn>
  void write(const std::string& name, Fn&& fill) {
    const auto path = dir_ / name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    fill(os);
    if (!os) throw std::runtime_error("write failed for " + path.string());
    files_.push_back(path);
  }

  void json(const std::string& name, const nlohmann::ordered_json& j) {
    write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

  const std::vector<std::filesystem::path>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
};

inline std::string module_of(const std::string& command) {
  if (command == "sample-noise") return "noise_fields";
  if (is_study(command)) return "convergence_lab";
  return "mild_solver";
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline FieldPath sample_field(const RunConfig& c) {
  const auto q = QSpec::from_decay(c.noise_modes_J, {c.lambda0, c.lambda_decay_p, c.mu0, c.mu_decay_q});
  if (c.noise_kind == "wiener")
    return build_field(q, NoiseKind::wiener, 0.5, c.steps_K, c.horizon_T, c.seed, c.modes_M);
  // fBm modes for any H in (0,1); same streams as build_field.
  const FbmSampler sampler(c.hurst_H, c.steps_K, c.horizon_T);
  FieldPath f;
  f.kind = NoiseKind::fbm;
  f.hurst = c.hurst_H;
  for (std::size_t j = 0; j < q.modes(); ++j) {
    f.weights.push_back(std::sqrt(q.mu[j]));
    f.modes.push_back(sampler.sample(derive_seed(c.seed, {stream::fbm, j})).path);
  }
  return f;
}

inline int dispatch(const RunConfig& c, ArtifactWriter& out, std::string& message) {
  if (c.command == "sample-noise") {
    const auto field = sample_field(c);
    out.write("noise.csv", [&](std::ostream& os) { write_field_csv(os, field); });
    if (c.format == "json") {
      nlohmann::ordered_json j;
      j["kind"] = c.noise_kind;
      j["hurst"] = field.hurst;
      j["seed"] = c.seed;
      j["weights"] = field.weights;
      auto modes = nlohmann::ordered_json::array();
      for (const auto& m : field.modes) modes.push_back(m.values);
      j["modes"] = modes;
      out.json("noise.json", j);
    }
    message = "sampled " + std::to_string(field.size()) + " " + c.noise_kind + " mode(s)";
    return 0;
  }
  if (c.command == "solve" || c.command == "solve-smoothed") {
    const auto spec = problem_spec(c);
    const auto noise = make_noise(spec.qspec, spec.exponent.hurst, c.steps_K, c.horizon_T, c.seed, c.modes_M);
    const auto sol = c.command == "solve"
                         ? solve_mild(spec, noise, c.time_step(), solver_options(c))
                         : solve_smoothed(spec, noise, c.mollify_rate_n, c.stop_level_N, c.time_step(),
                                          solver_options(c));
    if (c.format == "json") {
      out.json("solution.json", solution_json(sol, c));
    } else {
      out.json("solution.json", solution_header(sol, c));
      out.write("solution.csv", [&](std::ostream& os) { write_solution_csv(os, sol); });
    }
    message = "solved " + std::to_string(c.steps_K) + " steps, Besov norm " + format_double(sol.ledger.norm);
    return 0;
  }
  auto rep = run_study(study_config(c));
  rep.config = config_json(c);
  out.json("report.json", to_json(rep));
  out.write("report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
  message = to_string(rep.kind) + " study: " + std::to_string(rep.rungs.size()) + " rungs";
  if (rep.inconclusive) {
    message += " (inconclusive)";
    return 4;
  }
  return 0;
}

}  // namespace detail

/// Runs the configured command and writes its artifacts plus manifest.json.
/// Exit codes: 0 success, 2 configuration or domain error, 3 numeric failure,
/// 4 inconclusive study, 1 anything else.
inline RunResult run(const RunConfig& c) {
  RunResult res;
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const std::string module = detail::module_of(c.command);
  try {
    detail::validate_config(c);
    detail::ArtifactWriter out(detail::output_directory(c));
    res.directory = out.dir();
    res.exit_code = detail::dispatch(c, out, res.message);
    res.files = out.files();
    nlohmann::ordered_json m;
    m["tool"] = "mildheat";
    m["version"] = tool_version;
    m["command"] = c.command;
    m["seed"] = c.seed;
    m["exit_code"] = res.exit_code;
    auto names = nlohmann::ordered_json::array();
    for (const auto& f : res.files) names.push_back(f.filename().string());
    m["files"] = names;
    m["config"] = config_json(c, true);
    m["started_at"] = detail::utc_timestamp(started);
    m["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.json("manifest.json", m);
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.message = std::string("[cli_io] ") + e.what();
  } catch (const DomainError& e) {
    res.exit_code = 2;
    res.message = "[" + module + "] " + e.what();
  } catch (const NumericFailure& e) {
    res.exit_code = 3;
    res.message = "[" + module + "] " + e.what();
    if (e.step() != NumericFailure::npos) res.message += " (step " + std::to_string(e.step()) + ")";
  } catch (const InconclusiveStudy& e) {
    res.exit_code = 4;
    res.message = "[" + module + "] " + e.what();
  } catch (const std::exception& e) {
    res.exit_code = 1;
    res.message = "[" + module + "] " + e.what();
  }
  return res;
}

}  // namespace mildheat
