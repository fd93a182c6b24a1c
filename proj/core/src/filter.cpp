#include "mef/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace mef {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kEigenFloor = -1e-10;

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

MinimumEnergyObserver::MinimumEnergyObserver(GeneratorBasis basis, FilterConfig config)
    : basis_(std::move(basis)), config_(std::move(config)) {
  if (config_.origin.size() != basis_.embedding_dim()) {
    throw DimensionError("filter origin must have the embedding dimension");
  }
  if (!(config_.delta_step_cap > 0.0)) throw std::invalid_argument("delta_step_cap must be > 0");
  if (!(config_.dt_max > 0.0)) throw std::invalid_argument("dt_max must be > 0");
  if (!(config_.p_solve_tolerance > 0.0)) {
    throw std::invalid_argument("p_solve_tolerance must be > 0");
  }
  if (!(config_.hessian_regularization >= 0.0)) {
    throw std::invalid_argument("hessian_regularization must be >= 0");
  }
  tangent_ = basis_.upsilon(config_.origin);
}

ObserverState MinimumEnergyObserver::init(const GroupElement& x_hat0, const Matrix& h0) const {
  const int m = basis_.embedding_dim();
  if (x_hat0.dim() != m) throw DimensionError("initial observer has the wrong dimension");
  if (h0.rows() != m || h0.cols() != m) throw DimensionError("H0 must be m x m");
  if ((h0 - h0.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
    throw std::invalid_argument("H0 is not symmetric");
  }
  const double lambda = min_eigenvalue(symmetrized(h0));
  if (lambda < kEigenFloor) {
    std::ostringstream os;
    os << "H0 is not positive semidefinite (min eigenvalue " << lambda << ")";
    throw std::invalid_argument(os.str());
  }
  return ObserverState{x_hat0, symmetrized(h0), Vector::Zero(m), 0.0};
}

void MinimumEnergyObserver::check_sample(const SignalSample& s) const {
  const int m = basis_.embedding_dim();
  const auto n = s.output_matrix.rows();
  const auto l = s.input_matrix.cols();
  if (s.velocity.size() != basis_.algebra_dim()) throw DimensionError("sample velocity length");
  if (s.output_matrix.cols() != m) throw DimensionError("C must have m columns");
  if (s.output.size() != n) throw DimensionError("y must have n entries");
  if (s.input_matrix.rows() != m) throw DimensionError("B must have m rows");
  if (s.state_gain.rows() != l || s.state_gain.cols() != l) throw DimensionError("Q must be l x l");
  if (s.output_gain.rows() != n || s.output_gain.cols() != n) throw DimensionError("R must be n x n");
}

Vector MinimumEnergyObserver::innovation(const ObserverState& state,
                                         const SignalSample& s) const {
  const Matrix& x_inv = state.x_hat.inverse();
  const Vector residual = s.output_matrix * (x_inv * config_.origin) - s.output;
  return x_inv.transpose() * (s.output_matrix.transpose() * (s.output_gain * residual));
}

Matrix MinimumEnergyObserver::input_spread(const SignalSample& s) const {
  if (s.input_matrix.cols() == 0) {
    return Matrix::Zero(basis_.embedding_dim(), basis_.embedding_dim());
  }
  const Matrix q_inv_bt = s.state_gain.llt().solve(s.input_matrix.transpose());
  return s.input_matrix * q_inv_bt;
}

Matrix MinimumEnergyObserver::curvature_matrix(const ObserverState& state) const {
  return tangent_.transpose() * state.hessian * tangent_ +
         tangent_.transpose() * basis_.upsilon_bar(state.gradient);
}

double MinimumEnergyObserver::curvature(const ObserverState& state) const {
  return min_eigenvalue(symmetrized(curvature_matrix(state)));
}

AlgebraVector MinimumEnergyObserver::correction_delta(const ObserverState& state,
                                                      const SignalSample& sample) const {
  check_sample(sample);
  const Matrix& h = state.hessian;
  const Vector& eta = state.gradient;
  const int d = basis_.algebra_dim();

  const Vector rhs =
      tangent_.transpose() * (innovation(state, sample) - h * (input_spread(sample) * eta));
  Matrix p = curvature_matrix(state);
  if (config_.hessian_regularization > 0.0) {
    p += config_.hessian_regularization * Matrix::Identity(d, d);
  }

  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return AlgebraVector::Zero(d);

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(p);
  AlgebraVector delta = cod.solve(rhs);
  delta += cod.solve(rhs - p * delta);
  const double relative_residual = (p * delta - rhs).norm() / rhs_norm;
  if (!(relative_residual <= config_.p_solve_tolerance) || !delta.allFinite()) {
    std::ostringstream os;
    os << "correction solve failed at t=" << state.t << " (relative residual "
       << relative_residual << ", rank " << cod.rank() << "/" << d << ")";
    throw SingularP(os.str(), relative_residual);
  }
  if (config_.negate_correction) delta = -delta;
  return delta;
}

Matrix MinimumEnergyObserver::hessian_rate(const ObserverState& state, const SignalSample& s,
                                           const AlgebraVector& delta) const {
  const Matrix& h = state.hessian;
  const Matrix big_delta = basis_.wedge(delta);
  const Matrix c_xinv = s.output_matrix * state.x_hat.inverse();
  return -h * big_delta - big_delta.transpose() * h - h * input_spread(s) * h +
         c_xinv.transpose() * s.output_gain * c_xinv;
}

Vector MinimumEnergyObserver::gradient_rate(const ObserverState& state, const SignalSample& s,
                                            const AlgebraVector& delta) const {
  const Matrix& h = state.hessian;
  const Vector& eta = state.gradient;
  const Matrix big_delta = basis_.wedge(delta);
  return -h * (big_delta * config_.origin) - big_delta.transpose() * eta -
         h * (input_spread(s) * eta) + innovation(state, s);
}

double MinimumEnergyObserver::value_rate(const ObserverState& state, const SignalSample& s,
                                         const AlgebraVector& delta) const {
  const Vector& eta = state.gradient;
  const Matrix big_delta = basis_.wedge(delta);
  const Vector r = s.output - s.output_matrix * state_estimate(state);
  double input_term = 0.0;
  if (s.input_matrix.cols() > 0) {
    const Vector bt_eta = s.input_matrix.transpose() * eta;
    input_term = bt_eta.dot(s.state_gain.llt().solve(bt_eta));
  }
  return -eta.dot(big_delta * config_.origin) - 0.5 * input_term +
         0.5 * r.dot(s.output_gain * r);
}

ObserverState MinimumEnergyObserver::step(const ObserverState& state, const SignalSample& sample,
                                          StepTrace* trace) const {
  if (!(sample.valid_until > state.t)) {
    throw std::invalid_argument("sample is not valid after the current state time");
  }
  check_sample(sample);
  const double target = std::min(sample.valid_until, state.t + config_.dt_max);
  const double time_eps = 1e-12 * std::max(1.0, std::abs(target));

  ObserverState x = state;
  while (target - x.t > time_eps) {
    const AlgebraVector delta = correction_delta(x, sample);
    const double remaining = target - x.t;
    double dt = std::min(config_.dt_max, remaining);
    const double delta_norm = delta.norm();
    if (delta_norm > 0.0) dt = std::min(dt, config_.delta_step_cap / delta_norm);

    const Matrix h_dot = hessian_rate(x, sample, delta);
    const Vector eta_dot = gradient_rate(x, sample, delta);
    const bool was_minimum = config_.reject_curvature_loss && curvature(x) > 0.0;

    ObserverState next = x;
    for (;;) {
      next.x_hat = basis_.exp(dt * delta) * x.x_hat * basis_.exp(dt * sample.velocity);
      next.hessian = symmetrized(x.hessian + dt * h_dot);
      next.gradient = x.gradient + dt * eta_dot;
      if (!was_minimum || dt <= config_.min_substep || curvature(next) > 0.0) break;
      dt = std::max(0.5 * dt, config_.min_substep);
    }
    next.t = dt >= remaining ? target : x.t + dt;
    if (trace != nullptr) {
      trace->substeps.push_back({x.t, dt, delta, x.x_hat.matrix(), x.x_hat.inverse()});
    }
    x = std::move(next);
  }
  x.t = target;
  return x;
}

ObserverState MinimumEnergyObserver::advance(const ObserverState& state,
                                             const SignalSample& sample,
                                             StepTrace* trace) const {
  const double time_eps = 1e-12 * std::max(1.0, std::abs(sample.valid_until));
  ObserverState x = state;
  while (sample.valid_until - x.t > time_eps) x = step(x, sample, trace);
  return x;
}

Vector MinimumEnergyObserver::state_estimate(const ObserverState& state) const {
  return state.x_hat.inverse() * config_.origin;
}

AlgebraVector MinimumEnergyObserver::optimality_residual(const ObserverState& state) const {
  return tangent_.transpose() * state.gradient;
}

}  // namespace mef
