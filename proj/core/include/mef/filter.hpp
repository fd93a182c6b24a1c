#pragma once

// Exact minimum-energy observer for systems on a homogeneous space M = G xi0
// that are linear in embedding coordinates:
//
//   d/dt xi = -U_t xi,        y = C_t xi,
//
// with observer X_hat in G, value-function Hessian H and gradient eta at the
// origin xi0. The correction Delta is chosen so that xi0 stays a critical
// point of the value function restricted to M, i.e. upsilon(xi0)^T eta = 0.
//
// Note on notation: some derivations write the transposed-action matrix of the
// critical-point identity with a "J" subscript. It is the transposed action of
// the gradient eta, upsilon_bar(eta), which is what correction_delta() uses.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mef/lie_core.hpp"

namespace mef {

struct ObserverState {
  GroupElement x_hat;
  Matrix hessian;   // m x m, symmetric
  Vector gradient;  // eta, m
  double t = 0.0;
};

/// One zero-order-held sensor interval [state.t, valid_until).
struct SignalSample {
  AlgebraVector velocity;  // measured U^vee
  Matrix output_matrix;    // C, n x m
  Vector output;           // y, n
  Matrix input_matrix;     // B, m x l
  Matrix state_gain;       // Q, l x l, SPD
  Matrix output_gain;      // R, n x n, PSD
  double valid_until = 0.0;
};

struct FilterConfig {
  Vector origin;  // xi0
  double delta_step_cap = 0.001;
  double dt_max = 0.1;
  double p_solve_tolerance = 1e-8;
  double hessian_regularization = 0.0;
  // Reject (and halve) a substep that would turn a positive-definite
  // curvature matrix P indefinite, down to min_substep.
  bool reject_curvature_loss = true;
  double min_substep = 1e-12;
  // Fault injection for negative-control checks: flips the sign of Delta.
  bool negate_correction = false;
};

/// The linear system for Delta could not be solved to tolerance.
class SingularP : public std::runtime_error {
 public:
  SingularP(const std::string& what, double relative_residual)
      : std::runtime_error(what), relative_residual_(relative_residual) {}
  double relative_residual() const { return relative_residual_; }

 private:
  double relative_residual_;
};

/// Per-substep record of one call to MinimumEnergyObserver::step.
struct Substep {
  double t = 0.0;
  double dt = 0.0;
  AlgebraVector delta;
  Matrix x_hat;  // observer matrix at the start of the substep
  Matrix x_hat_inv;
};

struct StepTrace {
  std::vector<Substep> substeps;
};

class MinimumEnergyObserver {
 public:
  MinimumEnergyObserver(GeneratorBasis basis, FilterConfig config);

  const GeneratorBasis& basis() const { return basis_; }
  const FilterConfig& config() const { return config_; }
  /// upsilon(xi0), m x d.
  const Matrix& tangent_basis() const { return tangent_; }

  /// Initial state with eta = 0 and t = 0. Throws std::invalid_argument if
  /// H0 is not symmetric or has an eigenvalue below -1e-10.
  ObserverState init(const GroupElement& x_hat0, const Matrix& h0) const;

  AlgebraVector correction_delta(const ObserverState& state, const SignalSample& sample) const;

  Matrix hessian_rate(const ObserverState& state, const SignalSample& sample,
                      const AlgebraVector& delta) const;
  Vector gradient_rate(const ObserverState& state, const SignalSample& sample,
                       const AlgebraVector& delta) const;
  double value_rate(const ObserverState& state, const SignalSample& sample,
                    const AlgebraVector& delta) const;

  /// Advances to min(sample.valid_until, state.t + dt_max) with adaptive
  /// substeps bounded by ||Delta^vee|| dt <= delta_step_cap.
  ObserverState step(const ObserverState& state, const SignalSample& sample,
                     StepTrace* trace = nullptr) const;

  /// Calls step() until sample.valid_until is reached.
  ObserverState advance(const ObserverState& state, const SignalSample& sample,
                        StepTrace* trace = nullptr) const;

  /// P = upsilon(xi0)^T H upsilon(xi0) + upsilon(xi0)^T upsilon_bar(eta): the
  /// matrix of the correction solve, equal to the Riemannian Hessian of the
  /// value function restricted to M when xi0 is a critical point.
  Matrix curvature_matrix(const ObserverState& state) const;
  /// Smallest eigenvalue of the symmetric part of curvature_matrix().
  double curvature(const ObserverState& state) const;

  /// X_hat^-1 xi0.
  Vector state_estimate(const ObserverState& state) const;
  /// upsilon(xi0)^T eta.
  AlgebraVector optimality_residual(const ObserverState& state) const;

 private:
  void check_sample(const SignalSample& sample) const;
  Vector innovation(const ObserverState& state, const SignalSample& sample) const;
  Matrix input_spread(const SignalSample& sample) const;  // B Q^-1 B^T

  GeneratorBasis basis_;
  FilterConfig config_;
  Matrix tangent_;
};

double min_eigenvalue(const Matrix& symmetric);

}  // namespace mef
