#pragma once

// Log-barrier interior point method for small dense convex programs
//
//   minimize   f(x)
//   subject to g_k(x) = a_k^T x + c_k [+ product bound] <= 0,
//
// with f smooth convex. Centering uses
// damped Newton steps with a feasibility-preserving backtracking line
// search; the barrier weight grows geometrically until the duality gap
// bound m/t drops below the requested tolerance. A phase-I problem finds a
// strictly feasible start from any feasible (possibly boundary) point.

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsel/linalg.hpp"

namespace qsel::barrier {

struct Term {
  Index index;
  double coeff;
};

/// Convex term 4 x_u x_v + (x_v - x_u - shift)^2. Algebraically equal to
/// (x_u + x_v)^2 - 2 shift (x_v - x_u) + shift^2 but evaluated without the
/// cancellation that form suffers when x_v is large.
struct ProductBound {
  Index u;
  Index v;
  double shift;

  double value(const Vector& x) const {
    const double d = x(v) - x(u) - shift;
    return 4.0 * x(u) * x(v) + d * d;
  }
};

/// One constraint g(x) <= 0: a sparse affine part plus an optional product
/// bound.
struct Constraint {
  std::vector<Term> linear;
  double constant = 0.0;
  std::optional<ProductBound> product;

  static Constraint bound_below(Index i, double lo) { return {{{i, -1.0}}, lo, std::nullopt}; }
  static Constraint bound_above(Index i, double hi) { return {{{i, 1.0}}, -hi, std::nullopt}; }

  double value(const Vector& x) const {
    double v = constant;
    for (const auto& t : linear) v += t.coeff * x(t.index);
    if (product) v += product->value(x);
    return v;
  }

  /// Gradient as a list of terms; indices may repeat.
  void gradient(const Vector& x, std::vector<Term>& out) const {
    out.assign(linear.begin(), linear.end());
    if (product) {
      const auto& q = *product;
      const double d = x(q.v) - x(q.u) - q.shift;
      out.push_back({q.u, 4.0 * x(q.v) - 2.0 * d});
      out.push_back({q.v, 4.0 * x(q.u) + 2.0 * d});
    }
  }

  /// Adds weight * Hessian of g to h. The product bound has Hessian
  /// [[2, 2], [2, 2]] on (u, v); the affine part has none.
  void add_hessian(Matrix& h, double weight) const {
    if (!product) return;
    const auto& q = *product;
    h(q.u, q.u) += 2.0 * weight;
    h(q.u, q.v) += 2.0 * weight;
    h(q.v, q.u) += 2.0 * weight;
    h(q.v, q.v) += 2.0 * weight;
  }
};

template <class F>
concept SmoothConvexObjective = requires(const F& f, const Vector& x, Vector& g, Matrix& h) {
  { f.value(x) } -> std::convertible_to<double>;
  f.derivatives(x, g, h);
};

struct Options {
  double initial_weight = 1.0;
  double weight_multiplier = 10.0;
  double gap_tolerance = 1e-8;
  double newton_tolerance = 1e-9;   // on lambda^2 / 2
  int max_newton_steps = 200;       // per centering
  int max_stages = 100;
  double armijo = 0.01;
  double backtrack = 0.5;
  /// A centering stall is tolerated once an earlier stage certified this gap.
  double stall_gap_tolerance = 1e-6;
};

struct Result {
  Vector x;
  double objective = 0.0;
  double gap_bound = 0.0;
  int stages = 0;
  int newton_steps = 0;
};

inline double max_violation(std::span<const Constraint> cons, const Vector& x) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : cons) worst = std::max(worst, c.value(x));
  return worst;
}

namespace detail {

template <SmoothConvexObjective F>
class Centering {
 public:
  Centering(const F& f, std::span<const Constraint> cons, const Options& opt)
      : f_(f), cons_(cons), opt_(opt) {}

  struct Outcome {
    int steps = 0;
    bool stalled = false;  // rounding stopped progress before centering
  };

  /// Runs Newton's method on t f(x) - sum log(-g(x)) from a strictly feasible
  /// x. x only ever moves to strictly feasible points with lower barrier value.
  Outcome run(Vector& x, double t) {
    slack_.resize(cons_.size());
    double fx = f_.value(x);
    for (int it = 0; it < opt_.max_newton_steps; ++it) {
      f_.derivatives(x, fgrad_, fhess_);
      grad_ = t * fgrad_;
      hess_ = t * fhess_;
      for (std::size_t k = 0; k < cons_.size(); ++k) {
        const auto& c = cons_[k];
        const double s = -c.value(x);
        slack_[k] = s;
        c.gradient(x, cg_);
        for (const auto& a : cg_) {
          grad_(a.index) += a.coeff / s;
          for (const auto& b : cg_) hess_(a.index, b.index) += a.coeff * b.coeff / (s * s);
        }
        c.add_hessian(hess_, 1.0 / s);
      }
      newton_direction();
      const double slope = grad_.dot(step_);
      const double decrement = -slope;
      if (!(decrement >= 0.0) || !step_.allFinite()) {
        throw SolverError("barrier Newton system is not positive definite");
      }
      if (decrement / 2.0 <= opt_.newton_tolerance) return {it, false};

      // Largest step keeping every constraint strictly satisfied.
      double alpha = 1.0;
      trial_ = x + step_;
      while (max_violation(cons_, trial_) >= 0.0) {
        alpha *= opt_.backtrack;
        if (alpha < 1e-30) throw SolverError("barrier line search lost feasibility");
        trial_ = x + alpha * step_;
      }
      // Armijo on the change of the barrier function, written as sums of
      // log slack ratios to avoid cancellation when t is large.
      double ftrial;
      for (;;) {
        ftrial = f_.value(trial_);
        double change = t * (ftrial - fx);
        for (std::size_t k = 0; k < cons_.size(); ++k) {
          change -= std::log(-cons_[k].value(trial_) / slack_[k]);
        }
        if (change <= opt_.armijo * alpha * slope) break;
        alpha *= opt_.backtrack;
        if (alpha < 1e-12) return {it, decrement >= kRoundingFloor};
        trial_ = x + alpha * step_;
      }
      x = trial_;
      fx = ftrial;
      // Deep inside the quadratic convergence region a full step should pass;
      // backtracking there means the direction is dominated by rounding.
      if (alpha < 1.0 && decrement < kRoundingFloor) return {it + 1, false};
    }
    return {opt_.max_newton_steps, true};
  }

 private:
  static constexpr double kRoundingFloor = 1e-5;

  /// Solves hess * step = -grad after symmetric diagonal scaling; the barrier
  /// Hessian mixes entries of order 1 and 1/slack^2 near convergence.
  void newton_direction() {
    scale_ = hess_.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
    scaled_ = scale_.asDiagonal() * hess_ * scale_.asDiagonal();
    rhs_ = -(scale_.asDiagonal() * grad_);
    for (double shift = 0.0; shift < 1.0; shift = (shift == 0.0 ? 1e-14 : shift * 100.0)) {
      shifted_ = scaled_;
      shifted_.diagonal().array() += shift;
      llt_.compute(shifted_);
      if (llt_.info() == Eigen::Success) {
        step_ = llt_.solve(rhs_);
        step_ = scale_.asDiagonal() * step_;
        return;
      }
    }
    throw SolverError("barrier Newton system is not positive definite");
  }

  const F& f_;
  std::span<const Constraint> cons_;
  const Options& opt_;
  Vector grad_, fgrad_, step_, trial_, scale_, rhs_;
  Matrix hess_, fhess_, scaled_, shifted_;
  Eigen::LLT<Matrix> llt_;
  std::vector<double> slack_;
  std::vector<Term> cg_;
};

}  // namespace detail

/// Minimizes f subject to `cons` starting from a strictly feasible x0.
/// `stop_early` (optional) is consulted after every centering stage.
template <SmoothConvexObjective F>
Result minimize(const F& f, std::span<const Constraint> cons, Vector x0, const Options& opt,
                const std::function<bool(const Vector&)>& stop_early = {}) {
  if (!(max_violation(cons, x0) < 0.0)) throw SolverError("barrier start is not strictly feasible");
  Result res;
  res.x = std::move(x0);
  const double m = static_cast<double>(cons.size());
  double t = opt.initial_weight;
  detail::Centering<F> centering(f, cons, opt);
  res.gap_bound = std::numeric_limits<double>::infinity();
  for (int stage = 0; stage < opt.max_stages; ++stage) {
    const auto outcome = centering.run(res.x, t);
    res.newton_steps += outcome.steps;
    res.stages = stage + 1;
    if (outcome.stalled) {
      if (res.gap_bound <= opt.stall_gap_tolerance) break;
      throw SolverError("barrier centering stalled at weight " + std::to_string(t));
    }
    res.gap_bound = m / t;
    if (stop_early && stop_early(res.x)) break;
    if (res.gap_bound < opt.gap_tolerance) break;
    t *= opt.weight_multiplier;
  }
  if (!stop_early && res.gap_bound > opt.stall_gap_tolerance) {
    throw SolverError("barrier method hit the stage limit");
  }
  res.objective = f.value(res.x);
  return res;
}

namespace detail {

/// Objective of the phase-I problem: the last coordinate.
struct LastCoordinate {
  double value(const Vector& z) const { return z(z.size() - 1); }
  void derivatives(const Vector& z, Vector& g, Matrix& h) const {
    g = Vector::Zero(z.size());
    g(z.size() - 1) = 1.0;
    h = Matrix::Zero(z.size(), z.size());
  }
};

}  // namespace detail

/// Returns a strictly feasible point near the feasible start x0 by solving
/// min s s.t. g_k(x) <= s until s < 0. Throws if no interior exists.
inline Vector find_strictly_feasible(std::span<const Constraint> cons, const Vector& x0,
                                     const Options& opt) {
  const double worst = max_violation(cons, x0);
  if (worst < 0.0) return x0;
  const Index n = x0.size();
  std::vector<Constraint> lifted(cons.begin(), cons.end());
  for (auto& c : lifted) c.linear.push_back({n, -1.0});
  // s >= -1 keeps the phase-I problem bounded.
  lifted.push_back(Constraint{{{n, -1.0}}, -1.0, std::nullopt});

  Vector z(n + 1);
  z.head(n) = x0;
  z(n) = std::max(worst, 0.0) + 1.0;
  Options phase1 = opt;
  phase1.gap_tolerance = 1e-12;
  const auto stop = [&](const Vector& zz) {
    return zz(n) < 0.0 && max_violation(cons, zz.head(n)) < 0.0;
  };
  const Result r = minimize(detail::LastCoordinate{}, lifted, z, phase1, stop);
  if (!stop(r.x)) throw SolverError("no strictly feasible point exists (phase I optimum " +
                                    std::to_string(r.x(n)) + ")");
  return r.x.head(n);
}

}  // namespace qsel::barrier
