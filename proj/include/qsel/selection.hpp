#pragma once

// Sensor selection strategies: the relaxation-and-removal heuristic, two
// baselines (sensor-number maximization, precise-measurements-first) and
// exhaustive enumeration.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsel/feasibility.hpp"
#include "qsel/sca_solver.hpp"

namespace qsel {

/// One pass of the removal heuristic: the relaxed solution on the current
/// candidate set and the sensor dropped afterwards (none on the last pass).
struct RemovalStep {
  int iteration = 0;
  SensorSet candidates;
  Vector gamma;  // aligned with `candidates`
  Vector p;      // aligned with `candidates`
  std::optional<std::size_t> removed;
  int sca_iterations = 0;
};

struct SelectionDecision {
  SensorSet selected;
  Vector gamma;  // binary, full length
  Vector p;      // full length, mW
  Covariance P_post;
  double objective = 0.0;
  std::vector<RemovalStep> removal_log;
  int sca_iterations = 0;  // summed over all relaxed solves
};

enum class Strategy { proposed, snm, pmf, optimal };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::proposed: return "proposed";
    case Strategy::snm: return "snm";
    case Strategy::pmf: return "pmf";
    case Strategy::optimal: return "optimal";
  }
  return "unknown";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::proposed, Strategy::snm, Strategy::pmf, Strategy::optimal}) {
    if (name == to_string(s)) return s;
  }
  if (name == "brute-force" || name == "brute_force") return Strategy::optimal;
  return std::nullopt;
}

/// Tr{gamma_i C_i^T R_i^{-1} C_i}.
inline double selection_metric(double gamma_i, const SensorModel& sensor) {
  if (!(gamma_i >= 0.0 && gamma_i <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
  return gamma_i * sensor.precision_trace();
}

namespace detail {

inline SelectionDecision make_decision(SensorSet selected, Vector p, const Covariance& prior,
                                       const LtiInstance& inst) {
  const auto n = static_cast<Index>(inst.sensor_count());
  Vector gamma = Vector::Zero(n);
  for (std::size_t i : selected) gamma(static_cast<Index>(i)) = 1.0;
  InformationObjective obj(prior, inst);
  Covariance post(*obj.posterior(gamma));
  const double trace = post.trace();
  return {std::move(selected), std::move(gamma), std::move(p), std::move(post), trace, {}, 0};
}

inline void require_consistent(const LtiInstance& inst, const ChannelRealization& real) {
  real.validate();
  if (real.sensor_count() != inst.sensor_count()) {
    throw DimensionError("channel realization and instance disagree on the sensor count");
  }
}

inline bool lexicographically_less(const SensorSet& a, const SensorSet& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline SensorSet from_mask(std::uint32_t mask, std::size_t n) {
  SensorSet s;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask & (1u << i)) s.push_back(i);
  }
  return s;
}

/// Index (into `candidates`) of the smallest metric. Metrics within 1e-6 of
/// the largest metric count as ties and go to the smallest sensor index.
inline std::size_t argmin_metric(const std::vector<double>& metric) {
  const double scale = *std::max_element(metric.begin(), metric.end());
  const double lowest = *std::min_element(metric.begin(), metric.end());
  const double tol = 1e-6 * scale;
  for (std::size_t k = 0; k < metric.size(); ++k) {
    if (metric[k] <= lowest + tol) return k;
  }
  return 0;
}

}  // namespace detail

/// Relax, solve with SCA, drop the sensor with the smallest assimilated
/// precision trace, repeat until every remaining gamma is (numerically) one.
/// Sensors that cannot meet their threshold alone never enter the candidate set.
inline SelectionDecision heuristic_select(const LtiInstance& inst, const Covariance& p_prev,
                                          const ChannelRealization& real, const ScaConfig& cfg = {}) {
  detail::require_consistent(inst, real);
  const Covariance prior = predict(p_prev, inst);
  const auto n = static_cast<Index>(inst.sensor_count());
  // A sensor that misses its threshold even without interference belongs to
  // no feasible subset; keeping it would only distort the relaxation.
  SensorSet candidates;
  for (std::size_t i = 0; i < inst.sensor_count(); ++i) {
    if (real.can_transmit_alone(i)) candidates.push_back(i);
  }
  std::vector<RemovalStep> log;
  int total_iterations = 0;

  while (!candidates.empty()) {
    RelaxedInstance ri{inst, p_prev, real, candidates};
    if (!ri.assumption_holds()) break;
    const ScaResult res = sca_solve(ri, cfg);
    total_iterations += res.iterations;

    RemovalStep step;
    step.iteration = static_cast<int>(log.size()) + 1;
    step.candidates = candidates;
    step.sca_iterations = res.iterations;
    step.gamma.resize(static_cast<Index>(candidates.size()));
    step.p.resize(static_cast<Index>(candidates.size()));
    bool all_selected = true;
    std::vector<double> metric(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const auto i = static_cast<Index>(candidates[k]);
      const double g = std::clamp(res.state.gamma(i), 0.0, 1.0);
      step.gamma(static_cast<Index>(k)) = g;
      step.p(static_cast<Index>(k)) = res.state.p(i);
      metric[k] = selection_metric(g, inst.sensor(candidates[k]));
      if (g < 1.0 - kSelectedSnap) all_selected = false;
    }

    if (all_selected) {
      // The relaxed powers meet QoS up to the snap; fall back to the exact
      // minimal powers when they miss by more than the check slack. A set the
      // feasibility oracle rejects is never accepted.
      const auto verdict = min_power_vector(candidates, real);
      Vector p = res.state.p.cwiseMax(0.0).cwiseMin(real.p_max);
      std::optional<Vector> powers;
      if (verdict.feasible) powers = check_qos(candidates, p, real) ? p : *verdict.p_min;
      if (powers) {
        log.push_back(std::move(step));
        auto d = detail::make_decision(candidates, *powers, prior, inst);
        d.removal_log = std::move(log);
        d.sca_iterations = total_iterations;
        return d;
      }
    }

    const std::size_t k = detail::argmin_metric(metric);
    step.removed = candidates[k];
    log.push_back(std::move(step));
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k));
  }

  auto d = detail::make_decision({}, Vector::Zero(n), prior, inst);
  d.removal_log = std::move(log);
  d.sca_iterations = total_iterations;
  return d;
}

/// Largest feasible subset; ties by smallest total minimal power, then
/// lexicographic order. Powers are the minimal powers.
inline SelectionDecision snm_select(const LtiInstance& inst, const Covariance& p_prev,
                                    const ChannelRealization& real) {
  detail::require_consistent(inst, real);
  const std::size_t n = inst.sensor_count();
  if (n > 30) throw InvalidArgument("sensor-number maximization enumerates subsets; N <= 30");
  const Covariance prior = predict(p_prev, inst);
  for (std::size_t k = n; k >= 1; --k) {
    std::optional<SensorSet> best;
    Vector best_p;
    double best_total = 0.0;
    // Lexicographic enumeration of k-subsets via a selector mask.
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      SensorSet s;
      for (std::size_t i = 0; i < n; ++i) {
        if (pick[i]) s.push_back(i);
      }
      const auto v = min_power_vector(s, real);
      if (!v.feasible) continue;
      const double total = v.p_min->sum();
      if (!best || total < best_total * (1.0 - 1e-12)) {
        best = s;
        best_p = *v.p_min;
        best_total = total;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
    if (best) return detail::make_decision(*best, best_p, prior, inst);
  }
  return detail::make_decision({}, Vector::Zero(static_cast<Index>(n)), prior, inst);
}

/// Greedy by precision trace (ties to the smallest index); a sensor is kept
/// iff the kept set plus it stays feasible.
inline SelectionDecision pmf_select(const LtiInstance& inst, const Covariance& p_prev,
                                    const ChannelRealization& real) {
  detail::require_consistent(inst, real);
  const std::size_t n = inst.sensor_count();
  const Covariance prior = predict(p_prev, inst);
  std::vector<std::size_t> order = full_set(n);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inst.sensor(a).precision_trace() > inst.sensor(b).precision_trace();
  });
  SensorSet chosen;
  for (std::size_t s : order) {
    SensorSet trial = chosen;
    trial.insert(std::upper_bound(trial.begin(), trial.end(), s), s);
    if (is_feasible(trial, real)) chosen = std::move(trial);
  }
  Vector p = Vector::Zero(static_cast<Index>(n));
  if (!chosen.empty()) p = *min_power_vector(chosen, real).p_min;
  return detail::make_decision(chosen, p, prior, inst);
}

/// Exhaustive search over all 2^N subsets. Ties (relative 1e-12) go to the
/// smaller subset, then lexicographic order.
inline SelectionDecision brute_force_select(const LtiInstance& inst, const Covariance& p_prev,
                                            const ChannelRealization& real) {
  detail::require_consistent(inst, real);
  const std::size_t n = inst.sensor_count();
  if (n > 20) throw InvalidArgument("brute force supports at most 20 sensors");
  const Covariance prior = predict(p_prev, inst);
  const InformationObjective obj(prior, inst);

  SensorSet best;
  Vector best_p = Vector::Zero(static_cast<Index>(n));
  double best_value = prior.trace();
  const std::uint32_t count = 1u << n;
  for (std::uint32_t mask = 1; mask < count; ++mask) {
    SensorSet s = detail::from_mask(mask, n);
    Vector gamma = Vector::Zero(static_cast<Index>(n));
    for (std::size_t i : s) gamma(static_cast<Index>(i)) = 1.0;
    const double value = obj.value(gamma);
    const double tol = 1e-12 * std::abs(best_value);
    if (value > best_value + tol) continue;
    if (value >= best_value - tol) {
      if (s.size() > best.size()) continue;
      if (s.size() == best.size() && !detail::lexicographically_less(s, best)) continue;
    }
    const auto v = min_power_vector(s, real);
    if (!v.feasible) continue;
    best = std::move(s);
    best_p = *v.p_min;
    best_value = value;
  }
  return detail::make_decision(best, best_p, prior, inst);
}

inline SelectionDecision run_strategy(Strategy s, const LtiInstance& inst, const Covariance& p_prev,
                                      const ChannelRealization& real, const ScaConfig& cfg = {}) {
  switch (s) {
    case Strategy::proposed: return heuristic_select(inst, p_prev, real, cfg);
    case Strategy::snm: return snm_select(inst, p_prev, real);
    case Strategy::pmf: return pmf_select(inst, p_prev, real);
    case Strategy::optimal: return brute_force_select(inst, p_prev, real);
  }
  throw InvalidArgument("unknown strategy");
}

}  // namespace qsel
