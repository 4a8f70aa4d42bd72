#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qsel/estimation.hpp"
#include "qsel/harness/instances.hpp"

using namespace qsel;

namespace {

Vector selecting(std::initializer_list<std::size_t> one_based, std::size_t n) {
  Vector g = Vector::Zero(static_cast<Index>(n));
  for (std::size_t i : one_based) g(static_cast<Index>(i - 1)) = 1.0;
  return g;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Covariance, RejectsIndefiniteMatrix) {
  Matrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(Covariance{m}, InvalidArgument);
}

TEST(Covariance, SymmetrizesOnConstruction) {
  Matrix m(2, 2);
  m << 2.0, 1.0, 0.0, 2.0;
  const Covariance c(m);
  EXPECT_DOUBLE_EQ(c.matrix()(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(c.matrix()(1, 0), 0.5);
}

TEST(SensorModel, RejectsSingularNoise) {
  EXPECT_THROW(SensorModel(Matrix::Ones(1, 2), Matrix::Zero(1, 1)), InvalidArgument);
  EXPECT_THROW(SensorModel(Matrix::Ones(2, 2), Matrix::Identity(3, 3)), DimensionError);
}

TEST(LtiInstance, RejectsIndefiniteQAndMismatchedSensors) {
  EXPECT_THROW(LtiInstance(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), {}), InvalidArgument);
  EXPECT_THROW(LtiInstance(Matrix::Identity(2, 2), Matrix::Identity(2, 2), {SensorModel::scalar(1.0, 1.0)}),
               DimensionError);
}

TEST(Predict, ScalarCaseStudyPrior) {
  const auto pr = harness::case_study(1);
  EXPECT_NEAR(predict(pr.p_prev, pr.inst).trace(), 2.010025, 1e-12);
}

TEST(Predict, IdentityDynamicsWithoutNoiseIsIdentityMap) {
  std::mt19937_64 rng(3);
  const Matrix p = oracle::random_spd(rng, 4);
  const LtiInstance inst(Matrix::Identity(4, 4), Matrix::Zero(4, 4), {});
  EXPECT_LE(max_abs(predict(Covariance(p), inst).matrix() - p), 1e-12);
}

TEST(Predict, MatchesElementwiseTripleProduct) {
  std::mt19937_64 rng(4);
  const auto inst = oracle::random_instance(rng, 4, 0);
  const Matrix p = oracle::random_spd(rng, 4);
  Matrix expected = inst.Q();
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      for (Index k = 0; k < 4; ++k)
        for (Index l = 0; l < 4; ++l) expected(i, j) += inst.A()(i, k) * p(k, l) * inst.A()(j, l);
  EXPECT_LE(max_abs(predict(Covariance(p), inst).matrix() - expected), 1e-12);
}

TEST(PosteriorInfoForm, CaseOneSelection) {
  const auto pr = harness::case_study(1);
  const Covariance prior = predict(pr.p_prev, pr.inst);
  EXPECT_NEAR(posterior_info_form(prior, selecting({2, 4, 5}, 5), pr.inst).trace(), 0.0645, 5e-5);
}

TEST(PosteriorInfoForm, NoSelectionKeepsPrior) {
  std::mt19937_64 rng(5);
  const auto inst = oracle::random_instance(rng, 3, 4);
  const Covariance prior(oracle::random_spd(rng, 3));
  EXPECT_LE(max_abs(posterior_info_form(prior, Vector::Zero(4), inst).matrix() - prior.matrix()), 1e-12);
}

TEST(PosteriorInfoForm, MatchesExplicitInverseForRelaxedGamma) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 5);
    const Matrix prior = oracle::random_spd(rng, 3);
    const Vector g = oracle::random_relaxed(rng, 5);
    const Matrix expected = oracle::explicit_posterior(prior, g, inst);
    EXPECT_LE(max_abs(posterior_info_form(Covariance(prior), g, inst).matrix() - expected), 1e-10);
  }
}

TEST(PosteriorInfoForm, RejectsGammaOutsideUnitBox) {
  const auto pr = harness::case_study(1);
  const Covariance prior = predict(pr.p_prev, pr.inst);
  Vector g = Vector::Zero(5);
  g(0) = 1.5;
  EXPECT_THROW(posterior_info_form(prior, g, pr.inst), InvalidArgument);
  EXPECT_THROW(posterior_info_form(prior, Vector::Zero(4), pr.inst), DimensionError);
}

TEST(PosteriorGainForm, AgreesWithInfoFormOnRandomBinaryGamma) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 5);
    const Covariance prior(oracle::random_spd(rng, 3));
    const Vector g = oracle::random_binary(rng, 5);
    const Matrix info = posterior_info_form(prior, g, inst).matrix();
    EXPECT_LE(max_abs(posterior_gain_form(prior, g, inst).matrix() - info), 1e-8);
  }
}

TEST(PosteriorGainForm, AllSelectedEqualsSequentialKalmanUpdate) {
  std::mt19937_64 rng(8);
  const auto inst = oracle::random_instance(rng, 4, 3);
  const Matrix prior = oracle::random_spd(rng, 4);
  const Vector g = Vector::Ones(3);
  const Matrix expected = oracle::sequential_posterior(prior, g, inst);
  EXPECT_LE(max_abs(posterior_gain_form(Covariance(prior), g, inst).matrix() - expected), 1e-10);
}

TEST(PosteriorGainForm, NoneSelectedKeepsPrior) {
  std::mt19937_64 rng(9);
  const auto inst = oracle::random_instance(rng, 3, 4);
  const Covariance prior(oracle::random_spd(rng, 3));
  EXPECT_LE(max_abs(posterior_gain_form(prior, Vector::Zero(4), inst).matrix() - prior.matrix()), 1e-12);
}

TEST(PosteriorGainForm, RejectsFractionalGamma) {
  const auto pr = harness::case_study(1);
  EXPECT_THROW(posterior_gain_form(predict(pr.p_prev, pr.inst), Vector::Constant(5, 0.5), pr.inst), InvalidArgument);
}

TEST(KalmanStep, OpenLoopWhenNothingSelected) {
  const auto pr = harness::case_study(1);
  EstimatorState s{Vector::Constant(1, 2.0), pr.p_prev};
  const auto next = kalman_step(s, std::vector<std::optional<Vector>>(5), Vector::Zero(5), pr.inst);
  EXPECT_NEAR(next.x_hat(0), 2.01, 1e-12);
  EXPECT_NEAR(next.P.trace(), 2.010025, 1e-12);
}

TEST(KalmanStep, ScalarGainByHand) {
  const LtiInstance inst(Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.5), {SensorModel::scalar(2.0, 0.3)});
  const EstimatorState s{Vector::Constant(1, 1.0), Covariance::scalar(1.5)};
  const double p = 2.0;                          // 1.5 + 0.5
  const double k = p * 2.0 / (4.0 * p + 0.3);    // P C / (C^2 P + R)
  const double y = 3.0;
  const auto next = kalman_step(s, {Vector::Constant(1, y)}, Vector::Ones(1), inst);
  EXPECT_NEAR(next.x_hat(0), 1.0 + k * (y - 2.0), 1e-12);
  EXPECT_NEAR(next.P.trace(), (1.0 - 2.0 * k) * p, 1e-12);
}

TEST(KalmanStep, CovarianceEqualsInfoFormOfPrediction) {
  std::mt19937_64 rng(10);
  const auto inst = oracle::random_instance(rng, 3, 4);
  const EstimatorState s{Vector::Zero(3), Covariance(oracle::random_spd(rng, 3))};
  Vector g(4);
  g << 1, 0, 1, 1;
  std::vector<std::optional<Vector>> y(4);
  for (std::size_t i = 0; i < 4; ++i) {
    if (g(static_cast<Index>(i)) == 1.0) y[i] = Vector::Ones(inst.sensor(i).measurement_dim());
  }
  const auto next = kalman_step(s, y, g, inst);
  const Matrix expected = posterior_info_form(predict(s.P, inst), g, inst).matrix();
  EXPECT_LE(max_abs(next.P.matrix() - expected), 1e-10);
}

TEST(KalmanStep, MissingMeasurementOfSelectedSensorThrows) {
  const auto pr = harness::case_study(1);
  EstimatorState s{Vector::Zero(1), pr.p_prev};
  EXPECT_THROW(kalman_step(s, std::vector<std::optional<Vector>>(5), Vector::Ones(5), pr.inst), InvalidArgument);
}

TEST(KalmanStep, NoiselessLimitDrivesTraceToZero) {
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-3, 1e-5, 1e-7}) {
    const LtiInstance inst(Matrix::Identity(3, 3), Matrix::Identity(3, 3),
                           {SensorModel(Matrix::Identity(3, 3), eps * Matrix::Identity(3, 3))});
    const EstimatorState s{Vector::Zero(3), Covariance(Matrix::Identity(3, 3))};
    const double tr = kalman_step(s, {Vector::Zero(3)}, Vector::Ones(1), inst).P.trace();
    EXPECT_LT(tr, previous);
    EXPECT_LT(tr, 3.0 * eps);
    previous = tr;
  }
}

TEST(ObjectiveTrace, CaseTwoSelection) {
  const auto pr = harness::case_study(2);
  EXPECT_NEAR(objective_trace(selecting({1, 3}, 5), pr.p_prev, pr.inst), 0.1091, 5e-5);
  EXPECT_NEAR(objective_trace(selecting({1, 3}, 5), pr.p_prev, pr.inst),
              1.0 / (1.0 / 2.010025 + 1.0 / 0.5 + 1.0 / 0.15), 1e-12);
}

TEST(ObjectiveTrace, NoSelectionIsPriorTrace) {
  const auto pr = harness::case_study(2);
  EXPECT_NEAR(objective_trace(Vector::Zero(5), pr.p_prev, pr.inst), 2.010025, 1e-12);
}

TEST(ObjectiveTrace, MidpointConvexity) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 1000; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 4);
    const Covariance p_prev(oracle::random_spd(rng, 3));
    const Vector a = oracle::random_relaxed(rng, 4), b = oracle::random_relaxed(rng, 4);
    const double mid = objective_trace(0.5 * (a + b), p_prev, inst);
    const double avg = 0.5 * (objective_trace(a, p_prev, inst) + objective_trace(b, p_prev, inst));
    ASSERT_LE(mid, avg + 1e-10);
  }
}

TEST(ObjectiveTrace, MoreSensorsNeverHurt) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 300; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 5);
    const Covariance p_prev(oracle::random_spd(rng, 3));
    const Vector g = oracle::random_binary(rng, 5);
    const Vector superset = g.cwiseMax(oracle::random_binary(rng, 5));
    const double prior = predict(p_prev, inst).trace();
    ASSERT_LE(objective_trace(superset, p_prev, inst), objective_trace(g, p_prev, inst) + 1e-12);
    ASSERT_LE(objective_trace(g, p_prev, inst), prior + 1e-12);
  }
}

TEST(ObjectiveGradient, ScalarCaseStudyAtZero) {
  const auto pr = harness::case_study(1);
  const Vector g = objective_gradient(Vector::Zero(5), pr.p_prev, pr.inst);
  EXPECT_NEAR(g(1), -(1.0 / 0.2) * 2.010025 * 2.010025, 1e-10);
  EXPECT_NEAR(g(1), -20.2010, 1e-4);
}

TEST(ObjectiveGradient, NonPositiveAndMatchesCentralDifferences) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 4);
    const Matrix prior = oracle::prior_of(oracle::random_spd(rng, 3), inst);
    // Interior point so the finite-difference stencil stays inside [0, 1].
    const Vector x = 0.01 + 0.98 * oracle::random_relaxed(rng, 4).array();
    const auto f = [&](const Vector& g) { return oracle::explicit_posterior(prior, g, inst).trace(); };
    const Vector fd = oracle::central_difference(f, x, 1e-5);
    const Vector g = InformationObjective(Covariance(prior), inst).gradient(x);
    ASSERT_TRUE((g.array() <= 0.0).all());
    ASSERT_LE((g - fd).norm() / std::max(fd.norm(), 1e-12), 1e-5);
  }
}

TEST(ObjectiveHessian, MatchesDifferencesOfGradient) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 4);
    const Covariance prior(oracle::random_spd(rng, 3));
    const InformationObjective obj(prior, inst);
    const Vector x = 0.01 + 0.98 * oracle::random_relaxed(rng, 4).array();
    Vector g;
    Matrix h;
    obj.derivatives(x, g, h);
    for (Index k = 0; k < 4; ++k) {
      Vector xp = x, xm = x;
      xp(k) += 1e-6;
      xm(k) -= 1e-6;
      const Vector col = (obj.gradient(xp) - obj.gradient(xm)) / 2e-6;
      ASSERT_LE((h.col(k) - col).norm(), 1e-5 * std::max(1.0, col.norm()));
    }
    ASSERT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff(), -1e-9 * h.norm());
  }
}

TEST(Lmi, ReconstructedPosteriorSatisfiesBlockInequality) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 100; ++t) {
    const auto inst = oracle::random_instance(rng, 3, 5);
    const Covariance prior(oracle::random_spd(rng, 3));
    const Vector g = oracle::random_binary(rng, 5);
    const Covariance post = posterior_info_form(prior, g, inst);
    ASSERT_GE(lmi_min_eigenvalue(g, prior, post, inst), -1e-8);
  }
}
