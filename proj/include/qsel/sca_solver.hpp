#pragma once

// Successive convex approximation for the relaxed selection problem.
//
// Variables per candidate sensor i: relaxed selection gamma_i in [0,1],
// interference-plus-noise bound eta_i, transmit power p_i in [0, p_max,i].
// Each outer iteration linearizes the bilinear QoS term eta_i gamma_i at
// b_i = eta_i - gamma_i and solves the resulting convex program
//
//   min  Tr{(P_prior^{-1} + sum gamma_i C_i^T R_i^{-1} C_i)^{-1}}
//   s.t. sum_{j != i} h_j p_j + sigma^2 <= eta_i
//        (eta_i + gamma_i)^2 - 2 b_i (eta_i - gamma_i) + b_i^2 <= 4 h_i p_i / theta_i
//        box bounds on gamma and p
//
// with the log-barrier method. The posterior covariance is reconstructed
// from gamma afterwards instead of being carried as an LMI variable.

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <vector>

#include "qsel/barrier.hpp"
#include "qsel/channel.hpp"
#include "qsel/estimation.hpp"

namespace qsel {

/// gamma values this close to one count as fully selected.
inline constexpr double kSelectedSnap = 1e-4;

struct RelaxedInstance {
  LtiInstance inst;
  Covariance p_prev;
  ChannelRealization real;
  SensorSet candidates;

  std::size_t sensor_count() const noexcept { return inst.sensor_count(); }

  /// Some candidate can meet its QoS requirement on its own.
  bool assumption_holds() const {
    for (std::size_t i : candidates) {
      if (real.can_transmit_alone(i)) return true;
    }
    return false;
  }

  void validate() const {
    real.validate();
    if (real.sensor_count() != inst.sensor_count()) {
      throw DimensionError("channel realization and instance disagree on the sensor count");
    }
    if (candidates.empty()) throw InvalidArgument("candidate set is empty");
    if (!is_sorted_unique(candidates) || candidates.back() >= inst.sensor_count()) {
      throw InvalidArgument("candidate set must be sorted, unique and in range");
    }
    if (!assumption_holds()) {
      throw InvalidArgument("no candidate sensor can meet its QoS requirement alone");
    }
  }
};

struct SurrogateState {
  Vector gamma;
  Vector eta;
  Vector p;
  Vector b;
  Covariance P;
  double objective = 0.0;
};

struct ScaConfig {
  double outer_tolerance = 1e-6;
  int max_outer_iterations = 200;
  barrier::Options inner;

  /// Stops once the relative objective decrease falls below 1e-4.
  static ScaConfig coarse() {
    ScaConfig cfg;
    cfg.outer_tolerance = 1e-4;
    return cfg;
  }

  void validate() const {
    if (!(outer_tolerance > 0.0 && outer_tolerance < 1.0)) {
      throw InvalidArgument("outer tolerance must lie in (0, 1)");
    }
    if (max_outer_iterations <= 0) throw InvalidArgument("max outer iterations must be positive");
    if (!(inner.initial_weight > 0.0) || !(inner.weight_multiplier > 1.0) ||
        !(inner.gap_tolerance > 0.0) || !(inner.newton_tolerance > 0.0) ||
        inner.max_newton_steps <= 0) {
      throw InvalidArgument("barrier parameters must be positive (multiplier > 1)");
    }
  }
};

struct ScaResult {
  SurrogateState state;
  std::vector<double> history;        // objective at the start and after every accepted solve
  std::vector<double> max_residual;   // relaxed-problem constraint violation, same indexing
  int iterations = 0;
  bool converged = false;
};

/// Convex upper bound of eta * gamma that is tight at b = eta - gamma.
inline double surrogate_bound(double eta, double gamma, double b) {
  return ((eta + gamma) * (eta + gamma) - 2.0 * b * (eta - gamma) + b * b) / 4.0;
}

/// Largest violation of the relaxed problem's constraints over the candidate
/// set: interference bound, bilinear QoS bound and the boxes. <= 0 means feasible.
inline double relaxed_constraint_residual(const SurrogateState& st, const RelaxedInstance& ri) {
  const auto& real = ri.real;
  double worst = -std::numeric_limits<double>::infinity();
  const double received = real.h.dot(st.p);
  for (std::size_t i : ri.candidates) {
    const auto k = static_cast<Index>(i);
    const double interference = received - real.h(k) * st.p(k) + real.sigma2;
    worst = std::max(worst, interference - st.eta(k));
    worst = std::max(worst, st.eta(k) * st.gamma(k) * real.theta(k) - real.h(k) * st.p(k));
    worst = std::max({worst, -st.gamma(k), st.gamma(k) - 1.0, -st.p(k), st.p(k) - real.p_max(k)});
  }
  return worst;
}

namespace detail {

/// Candidates that can take part in the barrier problem. A zero-gain sensor
/// has no strictly feasible point with gamma > 0 and stays at gamma = p = 0.
inline SensorSet barrier_sensors(const RelaxedInstance& ri) {
  SensorSet out;
  for (std::size_t i : ri.candidates) {
    if (ri.real.h(static_cast<Index>(i)) > 0.0) out.push_back(i);
  }
  return out;
}

/// Variable layout: [gamma (s) | eta (s) | p (s)].
struct SurrogateObjective {
  InformationObjective info;
  Index s;

  double value(const Vector& x) const { return info.value(x.head(s)); }
  void derivatives(const Vector& x, Vector& g, Matrix& h) const {
    thread_local Vector gg;
    thread_local Matrix hh;
    info.derivatives(x.head(s), gg, hh);
    g.setZero(3 * s);
    h.setZero(3 * s, 3 * s);
    g.head(s) = gg;
    h.topLeftCorner(s, s) = hh;
  }
};

inline std::vector<barrier::Constraint> surrogate_constraints(const SensorSet& active,
                                                              const ChannelRealization& real,
                                                              const Vector& b) {
  using barrier::Constraint;
  const auto s = static_cast<Index>(active.size());
  const auto gam = [](Index k) { return k; };
  const auto eta = [s](Index k) { return s + k; };
  const auto pow = [s](Index k) { return 2 * s + k; };
  std::vector<Constraint> cons;
  cons.reserve(static_cast<std::size_t>(6 * s));
  for (Index k = 0; k < s; ++k) {
    const auto i = static_cast<Index>(active[static_cast<std::size_t>(k)]);
    cons.push_back(Constraint::bound_below(gam(k), 0.0));
    cons.push_back(Constraint::bound_above(gam(k), 1.0));
    cons.push_back(Constraint::bound_below(pow(k), 0.0));
    cons.push_back(Constraint::bound_above(pow(k), real.p_max(i)));

    Constraint interference;
    for (Index j = 0; j < s; ++j) {
      if (j == k) continue;
      interference.linear.push_back({pow(j), real.h(static_cast<Index>(active[static_cast<std::size_t>(j)]))});
    }
    interference.linear.push_back({eta(k), -1.0});
    interference.constant = real.sigma2;
    cons.push_back(std::move(interference));

    Constraint qos;
    qos.product = barrier::ProductBound{gam(k), eta(k), b(i)};
    qos.linear = {{pow(k), -4.0 * real.h(i) / real.theta(i)}};
    cons.push_back(std::move(qos));
  }
  return cons;
}

inline void fill_inactive_eta(SurrogateState& st, const ChannelRealization& real) {
  // Sensors outside the barrier problem get the tight interference bound.
  const double received = real.h.dot(st.p);
  for (Index i = 0; i < st.eta.size(); ++i) {
    if (std::isnan(st.eta(i))) st.eta(i) = received - real.h(i) * st.p(i) + real.sigma2;
  }
}

}  // namespace detail

/// Feasible starting point gamma = 0, p = 0, eta = sigma^2, P = A P_prev A^T + Q.
inline SurrogateState initialize(const RelaxedInstance& ri) {
  ri.validate();
  const auto n = static_cast<Index>(ri.sensor_count());
  Covariance prior = predict(ri.p_prev, ri.inst);
  SurrogateState st{Vector::Zero(n), Vector::Constant(n, ri.real.sigma2), Vector::Zero(n),
                    Vector::Constant(n, ri.real.sigma2), prior, prior.trace()};
  return st;
}

/// Solves the convex surrogate linearized at `state.b`, starting from `state`
/// (which must be feasible for it). The returned state keeps the same b.
inline SurrogateState solve_surrogate(const SurrogateState& state, const RelaxedInstance& ri,
                                      const ScaConfig& cfg) {
  const SensorSet active = detail::barrier_sensors(ri);
  const auto n = static_cast<Index>(ri.sensor_count());
  const auto s = static_cast<Index>(active.size());
  const Covariance prior = predict(ri.p_prev, ri.inst);

  SurrogateState out{Vector::Zero(n), Vector::Constant(n, std::numeric_limits<double>::quiet_NaN()),
                     Vector::Zero(n), state.b, prior, prior.trace()};
  if (s == 0) {
    detail::fill_inactive_eta(out, ri.real);
    return out;
  }

  Vector x0(3 * s);
  for (Index k = 0; k < s; ++k) {
    const auto i = static_cast<Index>(active[static_cast<std::size_t>(k)]);
    x0(k) = state.gamma(i);
    x0(s + k) = state.eta(i);
    x0(2 * s + k) = state.p(i);
  }
  const auto cons = detail::surrogate_constraints(active, ri.real, state.b);
  const detail::SurrogateObjective objective{InformationObjective(prior, ri.inst, active), s};

  const Vector start = barrier::find_strictly_feasible(cons, x0, cfg.inner);
  const barrier::Result res = barrier::minimize(objective, cons, start, cfg.inner);

  for (Index k = 0; k < s; ++k) {
    const auto i = static_cast<Index>(active[static_cast<std::size_t>(k)]);
    out.gamma(i) = res.x(k);
    out.eta(i) = res.x(s + k);
    out.p(i) = res.x(2 * s + k);
  }
  detail::fill_inactive_eta(out, ri.real);
  out.P = Covariance(*objective.info.posterior(res.x.head(s)));
  out.objective = out.P.trace();
  return out;
}

/// Outer loop: refresh b = eta - gamma, solve the surrogate, repeat until the
/// relative objective decrease drops below the tolerance.
inline ScaResult sca_solve(const RelaxedInstance& ri, const ScaConfig& cfg) {
  cfg.validate();
  ScaResult out{initialize(ri), {}, {}, 0, false};
  out.history.push_back(out.state.objective);
  out.max_residual.push_back(std::max(0.0, relaxed_constraint_residual(out.state, ri)));
  for (int it = 0; it < cfg.max_outer_iterations; ++it) {
    SurrogateState current = out.state;
    current.b = current.eta - current.gamma;
    SurrogateState next = solve_surrogate(current, ri, cfg);
    const double previous = out.state.objective;
    if (next.objective > previous) {
      // The previous iterate is feasible for this surrogate, so any increase
      // is inner-solver tolerance: no further progress is possible.
      out.converged = true;
      break;
    }
    out.state = std::move(next);
    ++out.iterations;
    out.history.push_back(out.state.objective);
    out.max_residual.push_back(std::max(0.0, relaxed_constraint_residual(out.state, ri)));
    if ((previous - out.state.objective) / std::max(1.0, std::abs(previous)) < cfg.outer_tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// One CSV row per outer iteration: iteration,objective,max_residual.
inline void write_trace_csv(std::ostream& os, const ScaResult& r) {
  os << "iteration,objective,max_residual\n";
  char buf[96];
  for (std::size_t t = 0; t < r.history.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.6g\n", t, r.history[t], r.max_residual[t]);
    os << buf;
  }
}

}  // namespace qsel
