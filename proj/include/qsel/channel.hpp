#pragma once

// Large/small scale fading channel draws, SINR and QoS checks. Powers and
// gains are linear (mW); dB only appears in the conversion helpers.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qsel/linalg.hpp"

namespace qsel {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Distance-dependent pathloss in dB, d in km.
inline double pathloss_db(double d_km) {
  if (!(d_km > 0.0)) throw InvalidArgument("pathloss distance must be positive");
  return -147.3 - 43.3 * std::log10(d_km);
}

/// SINR threshold implied by a minimum data rate r over bandwidth B:
/// theta = 2^{r/B} - 1.
inline double qos_threshold(double rate_bps, double bandwidth_hz) {
  if (!(rate_bps > 0.0) || !(bandwidth_hz > 0.0)) {
    throw InvalidArgument("rate and bandwidth must be positive");
  }
  return std::expm1(rate_bps / bandwidth_hz * std::numbers::ln2);
}

struct RateRequirement {
  double rate_bps = 0.0;
  double bandwidth_hz = 0.0;
};

struct ChannelConfig {
  std::vector<double> path_gain;         // c_i, linear
  std::vector<double> distance_km;       // d_i
  std::vector<double> shadowing_std_db;  // std of the log-normal shadowing, dB
  std::vector<double> p_max;             // mW
  double noise_power = 0.0;              // sigma^2, mW
  double radius_km = 2.0;
  std::optional<RateRequirement> rate;
  std::optional<std::vector<double>> theta;
  /// Disables Rayleigh fading (|g|^2 = 1). Used for deterministic checks.
  bool unit_small_scale = false;

  std::size_t sensor_count() const noexcept { return distance_km.size(); }

  void validate() const {
    const std::size_t n = sensor_count();
    if (path_gain.size() != n || shadowing_std_db.size() != n || p_max.size() != n) {
      throw DimensionError("channel config per-sensor vectors differ in length");
    }
    if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(p_max[i] > 0.0)) throw InvalidArgument("p_max must be positive");
      if (!(distance_km[i] > 0.0)) throw InvalidArgument("distance must be positive");
      if (!(path_gain[i] >= 0.0)) throw InvalidArgument("path gain must be nonnegative");
      if (!(shadowing_std_db[i] >= 0.0)) throw InvalidArgument("shadowing std must be nonnegative");
    }
    if (rate.has_value() == theta.has_value()) {
      throw InvalidArgument("exactly one of rate/bandwidth or explicit theta must be given");
    }
    if (theta) {
      if (theta->size() != n) throw DimensionError("theta length mismatch");
      for (double t : *theta) {
        if (!(t > 0.0)) throw InvalidArgument("theta must be positive");
      }
    }
  }

  std::vector<double> thresholds() const {
    if (theta) return *theta;
    return std::vector<double>(sensor_count(), qos_threshold(rate->rate_bps, rate->bandwidth_hz));
  }
};

/// Channel state for one time step.
struct ChannelRealization {
  Vector h;        // power gains, >= 0
  double sigma2 = 0.0;
  Vector p_max;
  Vector theta;    // linear SINR thresholds, > 0

  std::size_t sensor_count() const noexcept { return static_cast<std::size_t>(h.size()); }

  void validate() const {
    if (p_max.size() != h.size() || theta.size() != h.size()) {
      throw DimensionError("channel realization vectors differ in length");
    }
    if (!(sigma2 > 0.0)) throw InvalidArgument("noise power must be positive");
    for (Index i = 0; i < h.size(); ++i) {
      if (!(h(i) >= 0.0)) throw InvalidArgument("channel gains must be nonnegative");
      if (!(theta(i) > 0.0)) throw InvalidArgument("SINR thresholds must be positive");
      if (!(p_max(i) > 0.0)) throw InvalidArgument("power caps must be positive");
    }
  }

  /// h_i p_max,i / sigma^2 >= theta_i: the sensor can meet its QoS alone.
  bool can_transmit_alone(std::size_t i) const {
    const auto k = static_cast<Index>(i);
    return h(k) * p_max(k) / sigma2 >= theta(k);
  }
};

/// T_i = c_i f_i l_i with log-normal f_i and pathloss l_i, times an
/// exponential(1) small-scale power gain |g_i|^2. Deterministic in `seed`.
inline ChannelRealization draw_channel(const ChannelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.sensor_count();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> standard_normal(0.0, 1.0);
  std::exponential_distribution<double> fading(1.0);

  ChannelRealization out;
  out.h.resize(static_cast<Index>(n));
  out.p_max.resize(static_cast<Index>(n));
  out.theta.resize(static_cast<Index>(n));
  out.sigma2 = cfg.noise_power;
  const auto theta = cfg.thresholds();
  for (std::size_t i = 0; i < n; ++i) {
    // Draw both variates unconditionally so the stream layout does not
    // depend on which effects are switched off.
    const double z = standard_normal(rng);
    const double g2 = fading(rng);
    const double shadow = db_to_linear(cfg.shadowing_std_db[i] * z);
    const double large_scale = cfg.path_gain[i] * shadow * db_to_linear(pathloss_db(cfg.distance_km[i]));
    const auto k = static_cast<Index>(i);
    out.h(k) = large_scale * (cfg.unit_small_scale ? 1.0 : g2);
    out.p_max(k) = cfg.p_max[i];
    out.theta(k) = theta[i];
  }
  return out;
}

/// h_i p_i / (sum_{j != i} h_j p_j + sigma^2).
inline double sinr(std::size_t i, const Vector& p, const ChannelRealization& real) {
  if (p.size() != real.h.size()) throw DimensionError("power vector length mismatch");
  const auto k = static_cast<Index>(i);
  const double received = real.h.dot(p);
  const double own = real.h(k) * p(k);
  return own / (received - own + real.sigma2);
}

/// Every selected sensor meets its threshold (1e-9 slack) and every power is
/// inside [0, p_max].
inline bool check_qos(const SensorSet& selected, const Vector& p, const ChannelRealization& real,
                      double slack = 1e-9) {
  if (p.size() != real.h.size()) return false;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) < -slack || p(i) > real.p_max(i) + slack) return false;
  }
  for (std::size_t i : selected) {
    if (i >= real.sensor_count()) return false;
    if (sinr(i, p, real) < real.theta(static_cast<Index>(i)) - slack) return false;
  }
  return true;
}

}  // namespace qsel
