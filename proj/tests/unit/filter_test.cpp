#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "mef/filter.hpp"
#include "mef/quat_attitude.hpp"
#include "random_instances.hpp"

namespace {

using mef::AlgebraVector;
using mef::FilterConfig;
using mef::GeneratorBasis;
using mef::Matrix;
using mef::MinimumEnergyObserver;
using mef::ObserverState;
using mef::SignalSample;
using mef::Vector;
using mef::testing::RandomSource;

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

class QuaternionObserverTest : public ::testing::Test {
 protected:
  QuaternionObserverTest()
      : basis_(mef::quat::quaternion_basis()),
        observer_(basis_, mef::testing::quaternion_filter_config()) {}

  // Sample whose output is consistent with the current estimate.
  SignalSample consistent_sample(const ObserverState& s, RandomSource& rng) const {
    SignalSample sample = mef::testing::random_observer_instance(rng, basis_).sample;
    sample.output = sample.output_matrix * observer_.state_estimate(s);
    return sample;
  }

  // Direction-sensor sample of a static attitude q_true, linearized at the estimate.
  SignalSample attitude_sample(const MinimumEnergyObserver& observer, const ObserverState& s,
                               const mef::quat::Quaternion& q_true, RandomSource& rng,
                               double valid_until) const {
    const mef::quat::Vector3 z_ref = rng.unit_vector3();
    const mef::quat::Vector3 omega = 0.3 * rng.vector(3);
    const auto q_hat = mef::quat::Quaternion::from_vector(observer.state_estimate(s));
    return mef::quat::build_sample(basis_, q_hat, s.x_hat, omega,
                                   mef::quat::rotate_to_body(q_true, z_ref), z_ref,
                                   mef::quat::NoiseModel{}, valid_until);
  }

  GeneratorBasis basis_;
  MinimumEnergyObserver observer_;
};

TEST_F(QuaternionObserverTest, InitFromIdentity) {
  RandomSource rng(1);
  const ObserverState s = observer_.init(mef::GroupElement::identity(4), rng.psd(4, 2));
  EXPECT_EQ(s.gradient, Vector::Zero(4));
  EXPECT_EQ(s.t, 0.0);
  EXPECT_EQ(observer_.optimality_residual(s), Vector::Zero(3));
  EXPECT_EQ(observer_.state_estimate(s), mef::quat::origin());
}

TEST_F(QuaternionObserverTest, InitRejectsBadHessian) {
  Matrix neg = Matrix::Identity(4, 4);
  neg(2, 2) = -1.0;
  EXPECT_THROW(observer_.init(mef::GroupElement::identity(4), neg), std::invalid_argument);
  Matrix asym = Matrix::Identity(4, 4);
  asym(0, 1) = 1e-6;
  EXPECT_THROW(observer_.init(mef::GroupElement::identity(4), asym), std::invalid_argument);
  EXPECT_THROW(observer_.init(mef::GroupElement::identity(4), Matrix::Identity(3, 3)),
               mef::DimensionError);
}

TEST_F(QuaternionObserverTest, InitAcceptsRankThreeTangentProjector) {
  const mef::quat::Quaternion q0 =
      mef::quat::Quaternion::from_axis_angle(mef::quat::Vector3::UnitX(), 0.99 * std::numbers::pi);
  const mef::GroupElement x0 = mef::quat::group_from_quaternion(basis_, q0);
  const Matrix j = x0.inverse().transpose() * basis_.upsilon(q0.vector());
  const Matrix h0 = 0.01 * j * j.transpose();
  EXPECT_NO_THROW(observer_.init(x0, h0));
  EXPECT_NEAR(mef::quat::attitude_error_angle(mef::quat::Quaternion(),
                                              mef::quat::Quaternion::from_vector(
                                                  x0.inverse() * mef::quat::origin())),
              0.99 * std::numbers::pi, 1e-12);
}

TEST_F(QuaternionObserverTest, ZeroResidualGivesZeroCorrection) {
  RandomSource rng(2);
  ObserverState s{basis_.exp(rng.vector(3)), rng.psd(4, 4), Vector::Zero(4), 0.0};
  const SignalSample sample = consistent_sample(s, rng);
  EXPECT_EQ(observer_.correction_delta(s, sample), Vector::Zero(3));
}

TEST_F(QuaternionObserverTest, UnitCurvatureGivesProjectedInnovation) {
  RandomSource rng(3);
  const Matrix t = observer_.tangent_basis();
  // H = T T^T gives T^T H T = I because T has orthonormal columns.
  ObserverState s{basis_.exp(rng.vector(3)), t * t.transpose(), Vector::Zero(4), 0.0};
  const SignalSample sample = mef::testing::random_observer_instance(rng, basis_).sample;
  const Matrix x_inv = s.x_hat.inverse();
  const Vector innovation =
      x_inv.transpose() * sample.output_matrix.transpose() * sample.output_gain *
      (sample.output_matrix * x_inv * mef::quat::origin() - sample.output);
  const AlgebraVector expected = t.transpose() * innovation;
  EXPECT_LE((observer_.correction_delta(s, sample) - expected).cwiseAbs().maxCoeff(),
            1e-12 * (1.0 + expected.norm()));
}

TEST_F(QuaternionObserverTest, CorrectionMakesOriginCritical) {
  RandomSource rng(4);
  for (int k = 0; k < 1000; ++k) {
    const auto inst = mef::testing::random_observer_instance(rng, basis_);
    const AlgebraVector delta = observer_.correction_delta(inst.state, inst.sample);
    const Vector rate = observer_.gradient_rate(inst.state, inst.sample, delta);
    ASSERT_LE((observer_.tangent_basis().transpose() * rate).norm(), 1e-9) << "case " << k;
  }
}

TEST_F(QuaternionObserverTest, SignFlippedCorrectionBreaksCriticality) {
  RandomSource rng(5);
  const auto inst = mef::testing::random_observer_instance(rng, basis_);
  const AlgebraVector delta = observer_.correction_delta(inst.state, inst.sample);
  const Vector rate = observer_.gradient_rate(inst.state, inst.sample, -delta);
  EXPECT_GT((observer_.tangent_basis().transpose() * rate).norm(), 1e-3);
}

TEST_F(QuaternionObserverTest, SingularCurvatureThrows) {
  RandomSource rng(6);
  auto inst = mef::testing::random_observer_instance(rng, basis_);
  inst.state.hessian.setZero();
  inst.state.gradient.setZero();
  try {
    observer_.correction_delta(inst.state, inst.sample);
    FAIL() << "expected SingularP";
  } catch (const mef::SingularP& e) {
    EXPECT_GT(e.relative_residual(), 1e-8);
  }
}

TEST_F(QuaternionObserverTest, RegularizationMakesSingularSolvable) {
  RandomSource rng(7);
  auto inst = mef::testing::random_observer_instance(rng, basis_);
  inst.state.hessian.setZero();
  inst.state.gradient.setZero();
  FilterConfig fc = mef::testing::quaternion_filter_config();
  fc.hessian_regularization = 2.0;
  const MinimumEnergyObserver regularized(basis_, fc);
  const Vector innovation_part =
      regularized.tangent_basis().transpose() * inst.state.x_hat.inverse().transpose() *
      inst.sample.output_matrix.transpose() * inst.sample.output_gain *
      (inst.sample.output_matrix * inst.state.x_hat.inverse() * mef::quat::origin() -
       inst.sample.output);
  EXPECT_LE((regularized.correction_delta(inst.state, inst.sample) - innovation_part / 2.0)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST_F(QuaternionObserverTest, SampleDimensionsAreChecked) {
  RandomSource rng(8);
  auto inst = mef::testing::random_observer_instance(rng, basis_);
  inst.sample.output = Vector::Zero(3);
  EXPECT_THROW(observer_.correction_delta(inst.state, inst.sample), mef::DimensionError);
}

TEST_F(QuaternionObserverTest, HessianRateSpecialCases) {
  RandomSource rng(9);
  auto inst = mef::testing::random_observer_instance(rng, basis_);
  const Matrix c_xinv = inst.sample.output_matrix * inst.state.x_hat.inverse();
  SignalSample no_input = inst.sample;
  no_input.input_matrix = Matrix::Zero(4, 3);
  EXPECT_LE(max_abs(observer_.hessian_rate(inst.state, no_input, Vector::Zero(3)) -
                    c_xinv.transpose() * inst.sample.output_gain * c_xinv),
            1e-12);

  ObserverState zero_h = inst.state;
  zero_h.hessian.setZero();
  SignalSample no_output = inst.sample;
  no_output.output_matrix.setZero();
  EXPECT_EQ(observer_.hessian_rate(zero_h, no_output, rng.vector(3)), Matrix::Zero(4, 4));
}

TEST_F(QuaternionObserverTest, GradientRateSpecialCases) {
  RandomSource rng(10);
  ObserverState s{basis_.exp(rng.vector(3)), rng.psd(4, 4), Vector::Zero(4), 0.0};
  const SignalSample consistent = consistent_sample(s, rng);
  EXPECT_LE(observer_.gradient_rate(s, consistent, Vector::Zero(3)).norm(), 1e-12);

  const auto inst = mef::testing::random_observer_instance(rng, basis_);
  ObserverState zero_h = inst.state;
  zero_h.hessian.setZero();
  zero_h.gradient.setZero();
  const Matrix x_inv = zero_h.x_hat.inverse();
  const Vector expected =
      x_inv.transpose() * inst.sample.output_matrix.transpose() * inst.sample.output_gain *
      (inst.sample.output_matrix * x_inv * mef::quat::origin() - inst.sample.output);
  EXPECT_LE((observer_.gradient_rate(zero_h, inst.sample, Vector::Zero(3)) - expected).norm(),
            1e-12 * (1.0 + expected.norm()));
}

TEST_F(QuaternionObserverTest, ValueRate) {
  RandomSource rng(11);
  ObserverState s{basis_.exp(rng.vector(3)), rng.psd(4, 4), Vector::Zero(4), 0.0};
  EXPECT_NEAR(observer_.value_rate(s, consistent_sample(s, rng), Vector::Zero(3)), 0.0, 1e-12);
  const auto inst = mef::testing::random_observer_instance(rng, basis_);
  s.hessian = inst.state.hessian;
  EXPECT_GE(observer_.value_rate(s, inst.sample, rng.vector(3)), 0.0);
}

TEST_F(QuaternionObserverTest, EquilibriumStepLeavesStateUnchanged) {
  const ObserverState s = observer_.init(mef::GroupElement::identity(4), Matrix::Zero(4, 4));
  SignalSample sample;
  sample.velocity = Vector::Zero(3);
  sample.output_matrix = Matrix::Zero(4, 4);
  sample.output = Vector::Zero(4);
  sample.input_matrix = Matrix::Zero(4, 3);
  sample.state_gain = Matrix::Identity(3, 3);
  sample.output_gain = Matrix::Identity(4, 4);
  sample.valid_until = 0.1;
  const ObserverState next = observer_.step(s, sample);
  EXPECT_EQ(next.x_hat.matrix(), s.x_hat.matrix());
  EXPECT_EQ(next.hessian, s.hessian);
  EXPECT_EQ(next.gradient, s.gradient);
  EXPECT_DOUBLE_EQ(next.t, 0.1);
}

TEST_F(QuaternionObserverTest, ZeroResidualStepOnlyRotates) {
  RandomSource rng(12);
  FilterConfig fc = mef::testing::quaternion_filter_config();
  fc.reject_curvature_loss = false;
  const MinimumEnergyObserver observer(basis_, fc);
  const mef::GroupElement x0 = basis_.exp(rng.vector(3));
  const ObserverState s = observer.init(x0, rng.psd(4, 4));
  SignalSample sample = consistent_sample(s, rng);
  sample.valid_until = 0.05;
  mef::StepTrace trace;
  const ObserverState next = observer.advance(s, sample, &trace);
  ASSERT_EQ(trace.substeps.size(), 1u);
  const Matrix expected = x0.matrix() * basis_.exp(0.05 * sample.velocity).matrix();
  EXPECT_LE(max_abs(next.x_hat.matrix() - expected), 1e-14);
}

TEST_F(QuaternionObserverTest, StepRejectsExpiredSample) {
  RandomSource rng(13);
  const ObserverState s = observer_.init(mef::GroupElement::identity(4), rng.psd(4, 4));
  SignalSample sample = consistent_sample(s, rng);
  sample.valid_until = 0.0;
  EXPECT_THROW(observer_.step(s, sample), std::invalid_argument);
}

TEST_F(QuaternionObserverTest, SubstepContract) {
  RandomSource rng(14);
  FilterConfig fc = mef::testing::quaternion_filter_config();
  fc.delta_step_cap = 0.01;
  fc.dt_max = 0.02;
  const MinimumEnergyObserver observer(basis_, fc);
  const mef::quat::Quaternion q_true = rng.unit_quaternion();
  ObserverState s = observer.init(basis_.exp(rng.vector(3)), 2.0 * Matrix::Identity(4, 4));
  for (int epoch = 0; epoch < 20; ++epoch) {
    const SignalSample sample = attitude_sample(observer, s, q_true, rng, s.t + 0.1);
    mef::StepTrace trace;
    s = observer.advance(s, sample, &trace);
    for (const auto& sub : trace.substeps) {
      ASSERT_LE(sub.delta.norm() * sub.dt, fc.delta_step_cap + 1e-15);
      ASSERT_LE(sub.dt, fc.dt_max + 1e-15);
    }
    ASSERT_DOUBLE_EQ(s.t, sample.valid_until);
    ASSERT_LE(max_abs(s.hessian - s.hessian.transpose()), 1e-12);
    ASSERT_NEAR(observer.state_estimate(s).norm(), 1.0, 1e-12);
  }
}

TEST_F(QuaternionObserverTest, EulerPreservesCriticalPoint) {
  RandomSource rng(15);
  const mef::quat::Quaternion q_true = rng.unit_quaternion();
  ObserverState s = observer_.init(basis_.exp(rng.vector(3)), 2.0 * Matrix::Identity(4, 4));
  for (int epoch = 0; epoch < 20; ++epoch) {
    const SignalSample sample = attitude_sample(observer_, s, q_true, rng, s.t + 0.1);
    s = observer_.advance(s, sample);
    ASSERT_LE(observer_.optimality_residual(s).norm(), 1e-10);
  }
}

TEST_F(QuaternionObserverTest, ManifoldPreservedOverManySteps) {
  RandomSource rng(16);
  FilterConfig fc = mef::testing::quaternion_filter_config();
  fc.dt_max = 0.01;
  const MinimumEnergyObserver observer(basis_, fc);
  ObserverState s = observer.init(basis_.exp(rng.vector(3)), Matrix::Identity(4, 4));
  SignalSample sample = consistent_sample(s, rng);
  sample.output_gain.setZero();
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    sample.valid_until = s.t + 0.01;
    s = observer.step(s, sample);
    worst = std::max(worst, std::abs(observer.state_estimate(s).norm() - 1.0));
  }
  EXPECT_LE(worst, 1e-9);
}

TEST_F(QuaternionObserverTest, CurvatureMatrixDefinition) {
  RandomSource rng(17);
  const auto inst = mef::testing::random_observer_instance(rng, basis_);
  const Matrix t = observer_.tangent_basis();
  const Matrix expected = t.transpose() * inst.state.hessian * t +
                          t.transpose() * basis_.upsilon_bar(inst.state.gradient);
  EXPECT_LE(max_abs(observer_.curvature_matrix(inst.state) - expected), 1e-14);
}

TEST(MinimumEnergyObserver, ConfigValidation) {
  const GeneratorBasis basis = mef::quat::quaternion_basis();
  FilterConfig fc = mef::testing::quaternion_filter_config();
  fc.origin = Vector::Zero(3);
  EXPECT_THROW(MinimumEnergyObserver(basis, fc), mef::DimensionError);
  fc = mef::testing::quaternion_filter_config();
  fc.delta_step_cap = 0.0;
  EXPECT_THROW(MinimumEnergyObserver(basis, fc), std::invalid_argument);
  fc = mef::testing::quaternion_filter_config();
  fc.hessian_regularization = -1.0;
  EXPECT_THROW(MinimumEnergyObserver(basis, fc), std::invalid_argument);
}

// Scalar system on gl(1): H obeys dh/dt = c^2 r - h^2 b^2 / q.
TEST(ScalarRiccati, HessianRateReducesToScalarRiccati) {
  std::vector<Matrix> gen{Matrix::Identity(1, 1)};
  const GeneratorBasis basis(gen);
  FilterConfig fc;
  fc.origin = Vector::Ones(1);
  const MinimumEnergyObserver observer(basis, fc);
  SignalSample s;
  s.velocity = Vector::Zero(1);
  s.output_matrix = Matrix::Constant(1, 1, 1.5);
  s.output = Vector::Zero(1);
  s.input_matrix = Matrix::Constant(1, 1, 0.8);
  s.state_gain = Matrix::Constant(1, 1, 2.0);
  s.output_gain = Matrix::Constant(1, 1, 0.5);
  const ObserverState state{mef::GroupElement::identity(1), Matrix::Constant(1, 1, 0.3),
                            Vector::Zero(1), 0.0};
  const double h = 0.3;
  const double expected = 1.5 * 1.5 * 0.5 - h * h * 0.8 * 0.8 / 2.0;
  EXPECT_NEAR(observer.hessian_rate(state, s, Vector::Zero(1))(0, 0), expected, 1e-15);
}

TEST(MinEigenvalue, Diagonal) {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 3.0, -2.0, 1.0;
  EXPECT_DOUBLE_EQ(mef::min_eigenvalue(a), -2.0);
}

}  // namespace
