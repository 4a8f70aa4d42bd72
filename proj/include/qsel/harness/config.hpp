#pragma once

// Experiment configuration: JSON schema, defaults, validation and echo.
// Every dB quantity is converted to linear units here and nowhere else.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsel/harness/instances.hpp"
#include "qsel/selection.hpp"

namespace qsel::harness {

using json = nlohmann::ordered_json;

enum class Mode { case_study, sweep, monte_carlo, solve };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::case_study: return "case-study";
    case Mode::sweep: return "sweep";
    case Mode::monte_carlo: return "monte-carlo";
    case Mode::solve: return "solve";
  }
  return "unknown";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::case_study, Mode::sweep, Mode::monte_carlo, Mode::solve}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

/// Explicit single instance for `solve` (and `trace`).
struct LiteralInstance {
  Matrix a, q, p_prev;
  std::vector<SensorModel> sensors;
  ChannelRealization real;

  Problem problem() const { return {LtiInstance(a, q, sensors), Covariance(p_prev), real}; }
};

struct ExperimentConfig {
  Mode mode = Mode::sweep;
  std::uint64_t seed = 1;
  int trials = 200;
  std::vector<double> bandwidths_hz{20e6, 50e6, 100e6, 150e6, 200e6, 300e6, 500e6};
  double bandwidth_hz = 100e6;  // monte-carlo
  int case_id = 1;              // case-study
  std::vector<Strategy> strategies{Strategy::proposed, Strategy::snm, Strategy::pmf};
  std::string output_dir = "results";
  ScaConfig sca;
  RandomSystemSpec system;
  RandomSensorSpec sensors;
  RandomChannelSpec channel;
  std::optional<LiteralInstance> instance;

  void validate() const {
    if (trials < 1) throw ConfigError("trials", "must be at least 1");
    if (strategies.empty()) throw ConfigError("strategies", "must name at least one strategy");
    if (mode == Mode::sweep) {
      if (bandwidths_hz.empty()) throw ConfigError("bandwidths_hz", "sweep needs a nonempty grid");
      for (double b : bandwidths_hz) {
        if (!(b > 0.0)) throw ConfigError("bandwidths_hz", "bandwidths must be positive");
      }
    }
    if (mode == Mode::monte_carlo && !(bandwidth_hz > 0.0)) {
      throw ConfigError("bandwidth_hz", "must be positive");
    }
    if (mode == Mode::case_study && case_id != 1 && case_id != 2) {
      throw ConfigError("case", "must be 1 or 2");
    }
    if (mode == Mode::solve && !instance) throw ConfigError("instance", "solve mode needs an instance");
    if (mode == Mode::sweep || mode == Mode::monte_carlo) {
      if (sensors.count < 1) throw ConfigError("sensors.count", "must be at least 1");
      if (sensors.measurement_dim < 1) throw ConfigError("sensors.measurement_dim", "must be at least 1");
      if (!(sensors.r_bound > 0.0)) throw ConfigError("sensors.r_bound", "must be positive");
      if (!(sensors.r_floor_fraction > 0.0 && sensors.r_floor_fraction <= 1.0)) {
        throw ConfigError("sensors.r_floor_fraction", "must lie in (0, 1]");
      }
      if (sensors.r_rows_factor < 1) throw ConfigError("sensors.r_rows_factor", "must be at least 1");
      if (!(channel.noise_power_mw > 0.0)) throw ConfigError("channel.noise_power_dbm", "noise power must be positive");
      if (!(channel.radius_km > 0.0)) throw ConfigError("channel.radius_km", "must be positive");
      if (!(channel.min_distance_km > 0.0 && channel.min_distance_km <= channel.radius_km)) {
        throw ConfigError("channel.min_distance_km", "must lie in (0, radius_km]");
      }
      if (!(channel.shadowing_std_db >= 0.0)) throw ConfigError("channel.shadowing_std_db", "must be nonnegative");
      if (!(channel.p_max_mw > 0.0)) throw ConfigError("channel.p_max_mw", "must be positive");
      if (!(channel.rate_bps > 0.0)) throw ConfigError("channel.rate_bps", "must be positive");
      if (system.a.rows() != system.a.cols() || system.a.rows() == 0) {
        throw ConfigError("system.A", "must be a nonempty square matrix");
      }
      if (system.q.rows() != system.a.rows() || system.q.cols() != system.a.rows()) {
        throw ConfigError("system.Q", "must match the size of A");
      }
      if (system.p_prev.rows() != system.a.rows() || system.p_prev.cols() != system.a.rows()) {
        throw ConfigError("system.P_prev", "must match the size of A");
      }
    }
    if (std::find(strategies.begin(), strategies.end(), Strategy::optimal) != strategies.end()) {
      const std::size_t n = instance ? instance->sensors.size() : sensors.count;
      if (mode != Mode::case_study && n > 20) {
        throw ConfigError("strategies", "the optimal strategy supports at most 20 sensors");
      }
    }
    try {
      sca.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("sca", e.what());
    }
  }
};

namespace detail {

inline const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

inline std::vector<double> numbers(const json& j, const std::string& field) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError(field, "expected a number or an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v, field));
  return out;
}

/// A number (1x1), a flat array (one row) or an array of equal-length rows.
inline Matrix matrix(const json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a number or a nonempty array");
  if (j.front().is_number()) {
    const auto row = numbers(j, field);
    Matrix m(1, static_cast<Index>(row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) m(0, static_cast<Index>(c)) = row[c];
    return m;
  }
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError(field, "rows must be arrays of equal length");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], field);
  }
  return m;
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

/// Noise power from either `<prefix>noise_power_dbm` or `<prefix>noise_power_mw`.
inline double noise_power(const json& section, const std::string& prefix) {
  const json* dbm = find(section, "noise_power_dbm");
  const json* mw = find(section, "noise_power_mw");
  if (dbm && mw) throw ConfigError(prefix + "noise_power_dbm", "give the noise power in dBm or mW, not both");
  if (dbm) return db_to_linear(number(*dbm, prefix + "noise_power_dbm"));
  if (mw) return number(*mw, prefix + "noise_power_mw");
  throw ConfigError(prefix + "noise_power_dbm", "noise power is required");
}

/// Per-sensor value given as a scalar or a length-n array.
inline Vector per_sensor(const json& j, std::size_t n, const std::string& field) {
  const auto v = numbers(j, field);
  if (v.size() == 1) return Vector::Constant(static_cast<Index>(n), v.front());
  if (v.size() != n) throw ConfigError(field, "expected " + std::to_string(n) + " values");
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(n));
}

inline LiteralInstance parse_instance(const json& j) {
  const std::string p = "instance.";
  if (!j.is_object()) throw ConfigError("instance", "expected an object");
  const auto required = [&](const char* key) -> const json& {
    const json* v = find(j, key);
    if (!v) throw ConfigError(p + key, "is required");
    return *v;
  };
  LiteralInstance out;
  out.a = matrix(required("A"), p + "A");
  out.q = matrix(required("Q"), p + "Q");
  out.p_prev = find(j, "P_prev") ? matrix(j["P_prev"], p + "P_prev")
                                 : Matrix::Identity(out.a.rows(), out.a.cols());
  const json& sensors = required("sensors");
  if (!sensors.is_array() || sensors.empty()) throw ConfigError(p + "sensors", "expected a nonempty array");
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const std::string f = p + "sensors[" + std::to_string(i) + "].";
    const json* c = find(sensors[i], "C");
    const json* r = find(sensors[i], "R");
    if (!c) throw ConfigError(f + "C", "is required");
    if (!r) throw ConfigError(f + "R", "is required");
    try {
      out.sensors.emplace_back(matrix(*c, f + "C"), matrix(*r, f + "R"));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(f + "R", e.what());
    }
  }
  const std::size_t n = out.sensors.size();
  out.real.h = per_sensor(required("h"), n, p + "h");
  out.real.sigma2 = noise_power(j, p);
  out.real.p_max = find(j, "p_max_mw") ? per_sensor(j["p_max_mw"], n, p + "p_max_mw")
                                       : Vector::Ones(static_cast<Index>(n));
  const json* theta = find(j, "theta");
  const json* rate = find(j, "rate_bps");
  const json* bw = find(j, "bandwidth_hz");
  if (theta && (rate || bw)) throw ConfigError(p + "theta", "give theta or rate_bps/bandwidth_hz, not both");
  if (theta) {
    out.real.theta = per_sensor(*theta, n, p + "theta");
  } else if (rate && bw) {
    out.real.theta = Vector::Constant(static_cast<Index>(n),
                                      qos_threshold(number(*rate, p + "rate_bps"), number(*bw, p + "bandwidth_hz")));
  } else {
    throw ConfigError(p + "theta", "is required (or rate_bps and bandwidth_hz)");
  }
  try {
    out.real.validate();
    out.problem();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("instance", e.what());
  }
  return out;
}

}  // namespace detail

/// Builds a config from parsed JSON. Unknown keys are rejected so typos do
/// not silently fall back to defaults.
inline ExperimentConfig config_from_json(const json& j) {
  using detail::find;
  using detail::number;
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  static const std::vector<std::string> known{"mode", "seed", "trials", "bandwidths_hz", "bandwidth_hz",
                                              "case", "strategies", "output_dir", "sca", "system",
                                              "sensors", "channel", "instance"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(key, "unknown field");
  }

  ExperimentConfig cfg;
  if (const json* m = find(j, "mode")) {
    if (!m->is_string()) throw ConfigError("mode", "expected a string");
    const auto mode = parse_mode(m->get<std::string>());
    if (!mode) throw ConfigError("mode", "must be case-study, sweep, monte-carlo or solve");
    cfg.mode = *mode;
  }
  if (const json* s = find(j, "seed")) {
    const bool nonnegative =
        s->is_number_unsigned() || (s->is_number_integer() && s->get<std::int64_t>() >= 0);
    if (!nonnegative) throw ConfigError("seed", "expected a nonnegative integer");
    cfg.seed = s->get<std::uint64_t>();
  }
  if (const json* t = find(j, "trials")) {
    if (!t->is_number_integer()) throw ConfigError("trials", "expected an integer");
    cfg.trials = t->get<int>();
  }
  if (const json* b = find(j, "bandwidths_hz")) cfg.bandwidths_hz = detail::numbers(*b, "bandwidths_hz");
  if (const json* b = find(j, "bandwidth_hz")) cfg.bandwidth_hz = number(*b, "bandwidth_hz");
  if (const json* c = find(j, "case")) {
    if (!c->is_number_integer()) throw ConfigError("case", "expected 1 or 2");
    cfg.case_id = c->get<int>();
  }
  if (const json* s = find(j, "strategies")) {
    if (!s->is_array()) throw ConfigError("strategies", "expected an array of names");
    cfg.strategies.clear();
    for (const auto& name : *s) {
      const auto st = name.is_string() ? parse_strategy(name.get<std::string>()) : std::nullopt;
      if (!st) throw ConfigError("strategies", "unknown strategy " + name.dump());
      cfg.strategies.push_back(*st);
    }
  }
  if (const json* o = find(j, "output_dir")) {
    if (!o->is_string()) throw ConfigError("output_dir", "expected a string");
    cfg.output_dir = o->get<std::string>();
  }
  if (cfg.mode == Mode::case_study) cfg.sca = ScaConfig::coarse();
  if (const json* s = find(j, "sca")) {
    if (const json* v = find(*s, "outer_tolerance")) cfg.sca.outer_tolerance = number(*v, "sca.outer_tolerance");
    if (const json* v = find(*s, "max_outer_iterations")) {
      if (!v->is_number_integer()) throw ConfigError("sca.max_outer_iterations", "expected an integer");
      cfg.sca.max_outer_iterations = v->get<int>();
    }
    if (const json* v = find(*s, "initial_weight")) cfg.sca.inner.initial_weight = number(*v, "sca.initial_weight");
    if (const json* v = find(*s, "weight_multiplier")) cfg.sca.inner.weight_multiplier = number(*v, "sca.weight_multiplier");
    if (const json* v = find(*s, "gap_tolerance")) cfg.sca.inner.gap_tolerance = number(*v, "sca.gap_tolerance");
    if (const json* v = find(*s, "newton_tolerance")) cfg.sca.inner.newton_tolerance = number(*v, "sca.newton_tolerance");
    if (const json* v = find(*s, "max_newton_steps")) {
      if (!v->is_number_integer()) throw ConfigError("sca.max_newton_steps", "expected an integer");
      cfg.sca.inner.max_newton_steps = v->get<int>();
    }
  }
  if (const json* s = find(j, "system")) {
    if (const json* v = find(*s, "A")) cfg.system.a = detail::matrix(*v, "system.A");
    if (const json* v = find(*s, "Q")) cfg.system.q = detail::matrix(*v, "system.Q");
    if (const json* v = find(*s, "P_prev")) cfg.system.p_prev = detail::matrix(*v, "system.P_prev");
    const Index n = cfg.system.a.rows();
    if (!find(*s, "Q") && cfg.system.q.rows() != n) cfg.system.q = Matrix::Identity(n, n);
    if (!find(*s, "P_prev") && cfg.system.p_prev.rows() != n) cfg.system.p_prev = Matrix::Identity(n, n);
  }
  if (const json* s = find(j, "sensors")) {
    if (const json* v = find(*s, "count")) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 1) {
        throw ConfigError("sensors.count", "expected a positive integer");
      }
      cfg.sensors.count = v->get<std::size_t>();
    }
    if (const json* v = find(*s, "measurement_dim")) {
      if (!v->is_number_integer()) throw ConfigError("sensors.measurement_dim", "expected an integer");
      cfg.sensors.measurement_dim = v->get<Index>();
    }
    if (const json* v = find(*s, "r_bound")) cfg.sensors.r_bound = number(*v, "sensors.r_bound");
    if (const json* v = find(*s, "r_floor_fraction")) cfg.sensors.r_floor_fraction = number(*v, "sensors.r_floor_fraction");
    if (const json* v = find(*s, "r_rows_factor")) {
      if (!v->is_number_integer()) throw ConfigError("sensors.r_rows_factor", "expected an integer");
      cfg.sensors.r_rows_factor = v->get<int>();
    }
  }
  if (cfg.mode == Mode::sweep || cfg.mode == Mode::monte_carlo) {
    const json* ch = find(j, "channel");
    if (!ch) throw ConfigError("channel.noise_power_dbm", "noise power is required");
    cfg.channel.noise_power_mw = detail::noise_power(*ch, "channel.");
    if (const json* v = find(*ch, "path_gain_db")) cfg.channel.path_gain_db = number(*v, "channel.path_gain_db");
    if (const json* v = find(*ch, "radius_km")) cfg.channel.radius_km = number(*v, "channel.radius_km");
    if (const json* v = find(*ch, "min_distance_km")) cfg.channel.min_distance_km = number(*v, "channel.min_distance_km");
    if (const json* v = find(*ch, "shadowing_std_db")) cfg.channel.shadowing_std_db = number(*v, "channel.shadowing_std_db");
    if (const json* v = find(*ch, "p_max_mw")) cfg.channel.p_max_mw = number(*v, "channel.p_max_mw");
    if (const json* v = find(*ch, "rate_bps")) cfg.channel.rate_bps = number(*v, "channel.rate_bps");
    if (const json* v = find(*ch, "rayleigh")) {
      if (!v->is_boolean()) throw ConfigError("channel.rayleigh", "expected true or false");
      cfg.channel.rayleigh = v->get<bool>();
    }
  }
  if (const json* inst = find(j, "instance")) cfg.instance = detail::parse_instance(*inst);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// Normalized echo of a config; feeding it back to config_from_json yields
/// the same config.
inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = std::string(to_string(cfg.mode));
  j["seed"] = cfg.seed;
  j["trials"] = cfg.trials;
  j["bandwidths_hz"] = cfg.bandwidths_hz;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  j["case"] = cfg.case_id;
  json names = json::array();
  for (Strategy s : cfg.strategies) names.push_back(std::string(to_string(s)));
  j["strategies"] = names;
  j["output_dir"] = cfg.output_dir;
  j["sca"] = {{"outer_tolerance", cfg.sca.outer_tolerance},
              {"max_outer_iterations", cfg.sca.max_outer_iterations},
              {"initial_weight", cfg.sca.inner.initial_weight},
              {"weight_multiplier", cfg.sca.inner.weight_multiplier},
              {"gap_tolerance", cfg.sca.inner.gap_tolerance},
              {"newton_tolerance", cfg.sca.inner.newton_tolerance},
              {"max_newton_steps", cfg.sca.inner.max_newton_steps}};
  j["system"] = {{"A", detail::matrix_json(cfg.system.a)},
                 {"Q", detail::matrix_json(cfg.system.q)},
                 {"P_prev", detail::matrix_json(cfg.system.p_prev)}};
  j["sensors"] = {{"count", cfg.sensors.count},
                  {"measurement_dim", cfg.sensors.measurement_dim},
                  {"r_bound", cfg.sensors.r_bound},
                  {"r_floor_fraction", cfg.sensors.r_floor_fraction},
                  {"r_rows_factor", cfg.sensors.r_rows_factor}};
  j["channel"] = {{"noise_power_mw", cfg.channel.noise_power_mw},
                  {"path_gain_db", cfg.channel.path_gain_db},
                  {"radius_km", cfg.channel.radius_km},
                  {"min_distance_km", cfg.channel.min_distance_km},
                  {"shadowing_std_db", cfg.channel.shadowing_std_db},
                  {"p_max_mw", cfg.channel.p_max_mw},
                  {"rate_bps", cfg.channel.rate_bps},
                  {"rayleigh", cfg.channel.rayleigh}};
  if (cfg.instance) {
    const auto& in = *cfg.instance;
    json sensors = json::array();
    for (const auto& s : in.sensors) {
      sensors.push_back({{"C", detail::matrix_json(s.C())}, {"R", detail::matrix_json(s.R())}});
    }
    j["instance"] = {{"A", detail::matrix_json(in.a)},
                     {"Q", detail::matrix_json(in.q)},
                     {"P_prev", detail::matrix_json(in.p_prev)},
                     {"sensors", sensors},
                     {"h", detail::vector_json(in.real.h)},
                     {"noise_power_mw", in.real.sigma2},
                     {"p_max_mw", detail::vector_json(in.real.p_max)},
                     {"theta", detail::vector_json(in.real.theta)}};
  }
  return j;
}

}  // namespace qsel::harness
