#pragma once

// LTI plant, sensor observation models and the covariance arithmetic of the
// remote Kalman filter. Everything here is a pure function of immutable values.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsel/linalg.hpp"

namespace qsel {

/// Symmetric PSD error covariance. Symmetrized on construction.
class Covariance {
 public:
  static constexpr double kPsdTolerance = 1e-9;

  explicit Covariance(const Matrix& p) : p_(symmetrized(p)) {
    if (!is_square(p)) throw DimensionError("covariance must be square");
    const double scale = std::max(1.0, p_.cwiseAbs().maxCoeff());
    if (p_.size() > 0 && min_eigenvalue(p_) < -kPsdTolerance * scale) {
      throw InvalidArgument("covariance is not positive semidefinite");
    }
  }

  static Covariance scalar(double v) { return Covariance(Matrix::Constant(1, 1, v)); }

  const Matrix& matrix() const noexcept { return p_; }
  Index dim() const noexcept { return p_.rows(); }
  double trace() const { return p_.trace(); }

 private:
  Matrix p_;
};

/// Observation model y = C x + v, v ~ N(0, R) for one sensor.
class SensorModel {
 public:
  SensorModel(Matrix c, Matrix r) : c_(std::move(c)), r_(symmetrized(r)) {
    require_square(r_, c_.rows(), "sensor R");
    Eigen::LLT<Matrix> llt(r_);
    if (llt.info() != Eigen::Success) throw InvalidArgument("sensor R is not positive definite");
    information_ = symmetrized(c_.transpose() * llt.solve(c_));
  }

  static SensorModel scalar(double c, double r) {
    return SensorModel(Matrix::Constant(1, 1, c), Matrix::Constant(1, 1, r));
  }

  const Matrix& C() const noexcept { return c_; }
  const Matrix& R() const noexcept { return r_; }
  Index measurement_dim() const noexcept { return c_.rows(); }
  Index state_dim() const noexcept { return c_.cols(); }

  /// C^T R^{-1} C.
  const Matrix& information() const noexcept { return information_; }
  double precision_trace() const { return information_.trace(); }

 private:
  Matrix c_;
  Matrix r_;
  Matrix information_;
};

/// x_{k+1} = A x_k + w_k observed by an ordered list of sensors.
class LtiInstance {
 public:
  static constexpr double kQTolerance = 1e-10;

  LtiInstance(Matrix a, Matrix q, std::vector<SensorModel> sensors)
      : a_(std::move(a)), q_(symmetrized(q)), sensors_(std::move(sensors)) {
    if (!is_square(a_)) throw DimensionError("A must be square");
    require_square(q_, a_.rows(), "Q");
    if (q_.size() > 0 && min_eigenvalue(q_) < -kQTolerance) {
      throw InvalidArgument("Q is not positive semidefinite");
    }
    for (std::size_t i = 0; i < sensors_.size(); ++i) {
      if (sensors_[i].state_dim() != a_.rows()) {
        throw DimensionError("sensor " + std::to_string(i + 1) + " C has " +
                             std::to_string(sensors_[i].state_dim()) + " columns, expected " +
                             std::to_string(a_.rows()));
      }
    }
  }

  const Matrix& A() const noexcept { return a_; }
  const Matrix& Q() const noexcept { return q_; }
  const std::vector<SensorModel>& sensors() const noexcept { return sensors_; }
  const SensorModel& sensor(std::size_t i) const { return sensors_.at(i); }
  Index state_dim() const noexcept { return a_.rows(); }
  std::size_t sensor_count() const noexcept { return sensors_.size(); }

 private:
  Matrix a_;
  Matrix q_;
  std::vector<SensorModel> sensors_;
};

struct EstimatorState {
  Vector x_hat;
  Covariance P;
};

/// A P A^T + Q.
inline Covariance predict(const Covariance& p_prev, const LtiInstance& inst) {
  require_square(p_prev.matrix(), inst.state_dim(), "P_prev");
  return Covariance(inst.A() * p_prev.matrix() * inst.A().transpose() + inst.Q());
}

namespace detail {

inline void require_gamma(const Vector& gamma, const LtiInstance& inst) {
  if (static_cast<std::size_t>(gamma.size()) != inst.sensor_count()) {
    throw DimensionError("gamma has " + std::to_string(gamma.size()) + " entries, expected " +
                         std::to_string(inst.sensor_count()));
  }
}

inline void require_relaxed(const Vector& gamma) {
  for (Index i = 0; i < gamma.size(); ++i) {
    if (!(gamma(i) >= 0.0 && gamma(i) <= 1.0)) {
      throw InvalidArgument("gamma entries must lie in [0, 1]");
    }
  }
}

inline void require_binary(const Vector& gamma) {
  for (Index i = 0; i < gamma.size(); ++i) {
    if (gamma(i) != 0.0 && gamma(i) != 1.0) throw InvalidArgument("gamma must be binary");
  }
}

}  // namespace detail

/// Trace-of-inverse objective over a subset of sensors:
///   f(g) = Tr{ (P_prior^{-1} + sum_k g_k C_k^T R_k^{-1} C_k)^{-1} }
/// with k ranging over `subset`. Gradient and Hessian are closed form; f is
/// convex in g on the region where the information matrix is PD.
class InformationObjective {
 public:
  InformationObjective(const Covariance& prior, const LtiInstance& inst, const SensorSet& subset) {
    prior_information_ = symmetrized(spd_inverse(prior.matrix(), "prior covariance"));
    sensor_information_.reserve(subset.size());
    for (std::size_t i : subset) sensor_information_.push_back(inst.sensor(i).information());
  }

  InformationObjective(const Covariance& prior, const LtiInstance& inst)
      : InformationObjective(prior, inst, full_set(inst.sensor_count())) {}

  std::size_t size() const noexcept { return sensor_information_.size(); }

  Matrix information(const Vector& gamma) const {
    Matrix m;
    information_into(gamma, m);
    return m;
  }

  /// Posterior covariance M^{-1}; nullopt if M is not positive definite.
  std::optional<Matrix> posterior(const Vector& gamma) const {
    Eigen::LLT<Matrix> llt(information(gamma));
    if (llt.info() != Eigen::Success) return std::nullopt;
    return symmetrized(llt.solve(Matrix::Identity(prior_information_.rows(), prior_information_.cols())));
  }

  /// Tr M^{-1} = ||L^{-1}||_F^2 with M = L L^T.
  double value(const Eigen::Ref<const Vector>& gamma) const {
    thread_local Scratch sc;
    information_into(gamma, sc.m);
    sc.llt.compute(sc.m);
    if (sc.llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    sc.w.setIdentity(sc.m.rows(), sc.m.cols());
    sc.llt.matrixL().solveInPlace(sc.w);
    return sc.w.squaredNorm();
  }

  Vector gradient(const Vector& gamma) const {
    const Matrix w = posterior_or_throw(gamma);
    const Matrix w2 = w * w;
    Vector g(static_cast<Index>(size()));
    // Tr{W I W} = <I, W^2>
    for (std::size_t k = 0; k < size(); ++k) {
      g(static_cast<Index>(k)) = -(sensor_information_[k].cwiseProduct(w2)).sum();
    }
    return g;
  }

  /// Gradient and Hessian in one pass. H_kl = 2 Tr{W I_k W I_l W}.
  void derivatives(const Eigen::Ref<const Vector>& gamma, Vector& grad, Matrix& hess) const {
    thread_local Scratch sc;
    information_into(gamma, sc.m);
    sc.llt.compute(sc.m);
    if (sc.llt.info() != Eigen::Success) throw InvalidArgument("information matrix is not positive definite");
    sc.w.setIdentity(sc.m.rows(), sc.m.cols());
    sc.llt.solveInPlace(sc.w);
    sc.m = sc.w.transpose();
    sc.w = 0.5 * (sc.w + sc.m);
    const Index s = static_cast<Index>(size());
    sc.iw.resize(size());
    sc.wiw.resize(size());
    grad.resize(s);
    for (std::size_t k = 0; k < size(); ++k) {
      sc.iw[k].noalias() = sensor_information_[k] * sc.w;
      sc.wiw[k].noalias() = sc.w * sc.iw[k];
      grad(static_cast<Index>(k)) = -sc.wiw[k].trace();
    }
    hess.resize(s, s);
    for (Index k = 0; k < s; ++k) {
      const auto& a = sc.wiw[static_cast<std::size_t>(k)];
      for (Index l = k; l < s; ++l) {
        // Tr{X Y} = sum(X .* Y^T)
        const double v = 2.0 * a.cwiseProduct(sc.iw[static_cast<std::size_t>(l)].transpose()).sum();
        hess(k, l) = v;
        hess(l, k) = v;
      }
    }
  }

 private:
  Matrix posterior_or_throw(const Vector& gamma) const {
    auto w = posterior(gamma);
    if (!w) throw InvalidArgument("information matrix is not positive definite");
    return *w;
  }

  struct Scratch {
    Matrix m;
    Matrix w;
    Eigen::LLT<Matrix> llt;
    std::vector<Matrix> iw;
    std::vector<Matrix> wiw;
  };

  void information_into(const Eigen::Ref<const Vector>& gamma, Matrix& m) const {
    m = prior_information_;
    for (std::size_t k = 0; k < size(); ++k) m.noalias() += gamma(static_cast<Index>(k)) * sensor_information_[k];
  }

  Matrix prior_information_;
  std::vector<Matrix> sensor_information_;
};

/// (P_prior^{-1} + sum_i gamma_i C_i^T R_i^{-1} C_i)^{-1}. Accepts relaxed gamma.
inline Covariance posterior_info_form(const Covariance& p_prior, const Vector& gamma,
                                      const LtiInstance& inst) {
  require_square(p_prior.matrix(), inst.state_dim(), "P_prior");
  detail::require_gamma(gamma, inst);
  detail::require_relaxed(gamma);
  InformationObjective obj(p_prior, inst);
  auto w = obj.posterior(gamma);
  if (!w) throw InvalidArgument("information matrix is not positive definite");
  return Covariance(*w);
}

/// Kalman update with the masked stacked measurement model and a
/// pseudo-inverse of the innovation covariance. Binary gamma only.
inline Covariance posterior_gain_form(const Covariance& p_prior, const Vector& gamma,
                                      const LtiInstance& inst) {
  require_square(p_prior.matrix(), inst.state_dim(), "P_prior");
  detail::require_gamma(gamma, inst);
  detail::require_binary(gamma);
  const Index n = inst.state_dim();
  Index rows = 0;
  for (const auto& s : inst.sensors()) rows += s.measurement_dim();
  Matrix c_tilde = Matrix::Zero(rows, n);
  Matrix r_tilde = Matrix::Zero(rows, rows);
  Index offset = 0;
  for (std::size_t i = 0; i < inst.sensor_count(); ++i) {
    const auto& s = inst.sensor(i);
    const Index m = s.measurement_dim();
    const double g = gamma(static_cast<Index>(i));
    c_tilde.middleRows(offset, m) = g * s.C();
    r_tilde.block(offset, offset, m, m) = g * s.R();
    offset += m;
  }
  const Matrix& p = p_prior.matrix();
  const Matrix innovation = c_tilde * p * c_tilde.transpose() + r_tilde;
  const Matrix gain = p * c_tilde.transpose() * symmetric_pseudo_inverse(innovation);
  return Covariance(p - gain * c_tilde * p);
}

/// One predict + update cycle of the remote estimator. Measurements of
/// unselected sensors are ignored; a selected sensor without one is an error.
inline EstimatorState kalman_step(const EstimatorState& state,
                                  const std::vector<std::optional<Vector>>& measurements,
                                  const Vector& gamma, const LtiInstance& inst) {
  const Index n = inst.state_dim();
  if (state.x_hat.size() != n) throw DimensionError("x_hat dimension mismatch");
  detail::require_gamma(gamma, inst);
  detail::require_binary(gamma);
  if (measurements.size() != inst.sensor_count()) {
    throw DimensionError("one measurement slot per sensor is required");
  }

  const Vector x_prior = inst.A() * state.x_hat;
  const Covariance p_prior = predict(state.P, inst);

  Index rows = 0;
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < inst.sensor_count(); ++i) {
    if (gamma(static_cast<Index>(i)) == 0.0) continue;
    const auto& y = measurements[i];
    if (!y) throw InvalidArgument("missing measurement for selected sensor " + std::to_string(i + 1));
    if (y->size() != inst.sensor(i).measurement_dim()) {
      throw DimensionError("measurement of sensor " + std::to_string(i + 1) + " has wrong size");
    }
    used.push_back(i);
    rows += inst.sensor(i).measurement_dim();
  }
  if (used.empty()) return {x_prior, p_prior};

  Matrix c = Matrix::Zero(rows, n);
  Matrix r = Matrix::Zero(rows, rows);
  Vector y = Vector::Zero(rows);
  Index offset = 0;
  for (std::size_t i : used) {
    const auto& s = inst.sensor(i);
    const Index m = s.measurement_dim();
    c.middleRows(offset, m) = s.C();
    r.block(offset, offset, m, m) = s.R();
    y.segment(offset, m) = *measurements[i];
    offset += m;
  }
  const Matrix& p = p_prior.matrix();
  Eigen::LLT<Matrix> innovation(c * p * c.transpose() + r);
  const Matrix gain = innovation.solve(c * p).transpose();
  return {x_prior + gain * (y - c * x_prior), Covariance(p - gain * c * p)};
}

/// Tr of the posterior covariance after prediction from P_prev, for relaxed gamma.
inline double objective_trace(const Vector& gamma, const Covariance& p_prev, const LtiInstance& inst) {
  detail::require_gamma(gamma, inst);
  detail::require_relaxed(gamma);
  return InformationObjective(predict(p_prev, inst), inst).value(gamma);
}

/// d/dgamma_i of objective_trace: -Tr{M^{-1} C_i^T R_i^{-1} C_i M^{-1}}.
inline Vector objective_gradient(const Vector& gamma, const Covariance& p_prev, const LtiInstance& inst) {
  detail::require_gamma(gamma, inst);
  detail::require_relaxed(gamma);
  return InformationObjective(predict(p_prev, inst), inst).gradient(gamma);
}

/// Smallest eigenvalue of [[M, I], [I, P]] where M is the information matrix
/// at gamma. Nonnegative iff P >= M^{-1}.
inline double lmi_min_eigenvalue(const Vector& gamma, const Covariance& p_prior,
                                 const Covariance& p, const LtiInstance& inst) {
  const Index n = inst.state_dim();
  InformationObjective obj(p_prior, inst);
  Matrix block(2 * n, 2 * n);
  block.topLeftCorner(n, n) = obj.information(gamma);
  block.topRightCorner(n, n) = Matrix::Identity(n, n);
  block.bottomLeftCorner(n, n) = Matrix::Identity(n, n);
  block.bottomRightCorner(n, n) = p.matrix();
  return min_eigenvalue(symmetrized(block));
}

}  // namespace qsel
