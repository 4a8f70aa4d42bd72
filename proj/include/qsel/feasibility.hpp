#pragma once

// Exact QoS feasibility for a fixed transmitting subset. A subset is
// feasible iff the normalized interference matrix F has spectral radius
// below one and the resulting minimal powers respect the caps.

#include <optional>
#include <string_view>

#include "qsel/channel.hpp"

namespace qsel {

enum class FeasibilityReason { ok, spectral_radius_ge_one, power_cap_exceeded };

inline std::string_view to_string(FeasibilityReason r) {
  switch (r) {
    case FeasibilityReason::ok: return "ok";
    case FeasibilityReason::spectral_radius_ge_one: return "spectral_radius_ge_one";
    case FeasibilityReason::power_cap_exceeded: return "power_cap_exceeded";
  }
  return "unknown";
}

struct FeasibilityVerdict {
  bool feasible = false;
  /// Full-length power vector, zero outside the subset. Set iff feasible.
  std::optional<Vector> p_min;
  FeasibilityReason reason = FeasibilityReason::spectral_radius_ge_one;
};

namespace detail {

/// Upper bound on rho(F) for nonnegative F from a few power-iteration steps
/// on I + F (aperiodic, same Perron vector), using the Collatz-Wielandt bound
/// rho <= max_i (F v)_i / v_i for positive v.
inline double perron_upper_bound(const Matrix& f, Vector v, int steps = 50) {
  double bound = std::numeric_limits<double>::infinity();
  for (int k = 0; k < steps; ++k) {
    const Vector fv = f * v;
    double b = 0.0;
    for (Index i = 0; i < v.size(); ++i) b = std::max(b, fv(i) / v(i));
    bound = std::min(bound, b);
    v = (v + fv) / (v + fv).maxCoeff();
  }
  return bound;
}

}  // namespace detail

inline FeasibilityVerdict min_power_vector(const SensorSet& subset, const ChannelRealization& real) {
  if (subset.empty()) throw InvalidArgument("min_power_vector needs a nonempty subset");
  const auto m = static_cast<Index>(subset.size());
  for (std::size_t i : subset) {
    if (i >= real.sensor_count()) throw InvalidArgument("sensor index out of range");
  }
  FeasibilityVerdict verdict;
  for (std::size_t i : subset) {
    // A zero-gain sensor cannot reach a positive threshold with finite power.
    if (!(real.h(static_cast<Index>(i)) > 0.0)) {
      verdict.reason = FeasibilityReason::power_cap_exceeded;
      return verdict;
    }
  }

  Matrix f = Matrix::Zero(m, m);
  Vector u(m);
  for (Index a = 0; a < m; ++a) {
    const auto i = static_cast<Index>(subset[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < m; ++b) {
      if (a == b) continue;
      const auto j = static_cast<Index>(subset[static_cast<std::size_t>(b)]);
      f(a, b) = real.theta(i) * real.h(j) / real.h(i);
    }
    u(a) = real.theta(i) * real.sigma2 / real.h(i);
  }

  const Matrix system = Matrix::Identity(m, m) - f;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) return verdict;
  const Vector p = lu.solve(u);
  if (!(p.array() > 0.0).all()) return verdict;
  if (!(detail::perron_upper_bound(f, p) < 1.0 - 1e-9)) return verdict;

  Vector full = Vector::Zero(real.h.size());
  bool within_caps = true;
  for (Index a = 0; a < m; ++a) {
    const auto i = static_cast<Index>(subset[static_cast<std::size_t>(a)]);
    full(i) = p(a);
    if (p(a) > real.p_max(i) + 1e-9) within_caps = false;
  }
  if (!within_caps) {
    verdict.reason = FeasibilityReason::power_cap_exceeded;
    return verdict;
  }
  verdict.feasible = true;
  verdict.reason = FeasibilityReason::ok;
  verdict.p_min = std::move(full);
  return verdict;
}

inline bool is_feasible(const SensorSet& subset, const ChannelRealization& real) {
  if (subset.empty()) return true;
  return min_power_vector(subset, real).feasible;
}

}  // namespace qsel
