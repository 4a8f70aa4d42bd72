#pragma once

// Problem instances for experiments: the two built-in case studies and
// seeded random draws (geometry, channels, measurement models).

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qsel/channel.hpp"
#include "qsel/estimation.hpp"

namespace qsel::harness {

/// A complete single-step selection problem.
struct Problem {
  LtiInstance inst;
  Covariance p_prev;
  ChannelRealization real;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-trial seed; independent of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t grid_index) {
  std::uint64_t s = splitmix64(master);
  s = splitmix64(s ^ trial);
  return splitmix64(s ^ (grid_index * 0xd6e8feb86659fd93ULL + 1));
}

/// Scalar two-case study: A = 1.005, Q = 1, P_prev = 1, sigma^2 = 0.01 mW,
/// p_max = 1 mW, theta = sqrt(2) - 1, C_i = 1.
inline Problem case_study(int which) {
  if (which != 1 && which != 2) throw InvalidArgument("case study must be 1 or 2");
  const std::vector<double> r = which == 1 ? std::vector<double>{0.5, 0.2, 0.15, 0.2, 0.2}
                                           : std::vector<double>{0.5, 1.0, 0.15, 1.0, 1.0};
  std::vector<SensorModel> sensors;
  for (double ri : r) sensors.push_back(SensorModel::scalar(1.0, ri));
  ChannelRealization real;
  real.h = Vector(5);
  real.h << 2.0, 1.0, 0.01, 1.0, 1.0;
  real.sigma2 = db_to_linear(-20.0);
  real.p_max = Vector::Ones(5);
  real.theta = Vector::Constant(5, std::sqrt(2.0) - 1.0);
  return {LtiInstance(Matrix::Constant(1, 1, 1.005), Matrix::Constant(1, 1, 1.0), std::move(sensors)),
          Covariance::scalar(1.0), std::move(real)};
}

/// Five-state process used for the bandwidth experiments.
inline Matrix default_dynamics() {
  Matrix a(5, 5);
  a << 0.9416, -0.0180, 0.0715, 0.0262, -0.0196,
      -0.0559, 0.9948, 0.0544, 0.0251, -0.0148,
      -0.0564, -0.0176, 1.0686, 0.0255, -0.0162,
      -0.0631, -0.0090, 0.0652, 1.0284, -0.0179,
      -0.0197, -0.0046, 0.0200, 0.0096, 1.0049;
  return a;
}

struct RandomSensorSpec {
  std::size_t count = 10;
  Index measurement_dim = 5;
  double r_bound = 5.0;         // R_i <= r_bound * I
  double r_floor_fraction = 0.1;  // largest eigenvalue of R_i drawn in [floor, 1] * r_bound
  int r_rows_factor = 2;          // D has r_rows_factor * m rows
};

struct RandomChannelSpec {
  double noise_power_mw = 1e-3;
  double path_gain_db = 150.0;
  double radius_km = 2.0;
  double min_distance_km = 0.01;
  double shadowing_std_db = 8.0;
  double p_max_mw = 1.0;
  double rate_bps = 50e6;
  bool rayleigh = true;
};

struct RandomSystemSpec {
  Matrix a = default_dynamics();
  Matrix q = Matrix::Identity(5, 5);
  Matrix p_prev = Matrix::Identity(5, 5);
};

/// C_i with entries U[-1, 1]; R_i = D^T D + eps I with Gaussian D, rescaled so
/// that its largest eigenvalue is U[floor, 1] * r_bound. A square D makes R_i
/// nearly singular far too often, hence the taller default.
inline SensorModel random_sensor(std::mt19937_64& rng, Index m, Index n, const RandomSensorSpec& spec) {
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> top(spec.r_floor_fraction, 1.0);
  const Index rows = spec.r_rows_factor * m;
  Matrix c(m, n), d(rows, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) c(i, j) = entry(rng);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < m; ++j) d(i, j) = gauss(rng);
  Matrix r = d.transpose() * d + 1e-3 * Matrix::Identity(m, m);
  const double largest = Eigen::SelfAdjointEigenSolver<Matrix>(r, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  r *= top(rng) * spec.r_bound / largest;
  return SensorModel(std::move(c), symmetrized(r));
}

/// Distance from the disc centre for a point uniform over the disc area.
inline double random_distance(std::mt19937_64& rng, const RandomChannelSpec& ch) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double d = ch.radius_km * std::sqrt(u(rng));
  return std::max(d, ch.min_distance_km);
}

inline Problem random_problem(std::uint64_t seed, double bandwidth_hz, const RandomSystemSpec& sys,
                              const RandomSensorSpec& sensors, const RandomChannelSpec& ch) {
  std::mt19937_64 rng(seed);
  const Index n = sys.a.rows();
  ChannelConfig cfg;
  std::vector<SensorModel> models;
  models.reserve(sensors.count);
  for (std::size_t i = 0; i < sensors.count; ++i) {
    cfg.distance_km.push_back(random_distance(rng, ch));
    models.push_back(random_sensor(rng, sensors.measurement_dim, n, sensors));
  }
  cfg.path_gain.assign(sensors.count, db_to_linear(ch.path_gain_db));
  cfg.shadowing_std_db.assign(sensors.count, ch.shadowing_std_db);
  cfg.p_max.assign(sensors.count, ch.p_max_mw);
  cfg.noise_power = ch.noise_power_mw;
  cfg.radius_km = ch.radius_km;
  cfg.rate = RateRequirement{ch.rate_bps, bandwidth_hz};
  cfg.unit_small_scale = !ch.rayleigh;
  ChannelRealization real = draw_channel(cfg, splitmix64(seed ^ 0x5851f42d4c957f2dULL));
  return {LtiInstance(sys.a, sys.q, std::move(models)), Covariance(sys.p_prev), std::move(real)};
}

}  // namespace qsel::harness
