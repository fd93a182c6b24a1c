// Brute-force value function of the discretized error system.
//
// The error system is discretized with forward Euler,
//   e_{k+1} = (I + dt_k Delta_k) e_k + dt_k B_k mu_k,
// and the value at a terminal point e_T is the minimum of
//   1/2 |e_0 - prior_mean|^2_{H0} + sum_k dt_k (1/2 |mu_k|^2_Q + 1/2 |y_k - C_k X_k^{-1} e_k|^2_R)
// over (e_0, ..., e_N, mu_0, ..., mu_{N-1}) subject to the dynamics and e_N = e_T.
// The problem is solved as an equality-constrained linear least-squares problem
// through its sparse augmented system, factored once per problem.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mef/filter.hpp"
#include "mef/lie_core.hpp"

namespace mef::oracle {

struct DiscreteStep {
  double dt = 0.0;
  Matrix delta;        // m x m algebra matrix
  Matrix input;        // B, m x l
  Matrix state_gain;   // Q, l x l
  Matrix output;       // C, n x m
  Matrix x_hat_inv;    // m x m
  Vector measurement;  // y, n
  Matrix output_gain;  // R, n x n
};

struct DiscretizedProblem {
  Matrix h0;
  Vector prior_mean;  // X0 xi0
  std::vector<DiscreteStep> steps;

  int dim() const { return static_cast<int>(h0.rows()); }
  double horizon() const;
  void validate() const;
};

/// The terminal constraint cannot be met, or the least-squares problem is not
/// positive definite on the feasible set.
class InfeasibleTerminal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradientHessian {
  Vector gradient;
  Matrix hessian;
};

class ValueOracle {
 public:
  explicit ValueOracle(DiscretizedProblem problem);
  ~ValueOracle();
  ValueOracle(ValueOracle&&) noexcept;
  ValueOracle& operator=(ValueOracle&&) noexcept;

  double value(const Vector& terminal) const;
  // Central differences of the (affine) optimal residual, step h.
  GradientHessian gradient_hessian(const Vector& terminal, double h = 1e-4) const;
  // Largest |dV| along the columns of upsilon(origin), by central differences.
  double critical_point_residual(const GeneratorBasis& basis, const Vector& origin,
                                 double h = 1e-4) const;

  const DiscretizedProblem& problem() const { return problem_; }

 private:
  Vector residual(const Vector& terminal) const;

  struct Factorization;
  DiscretizedProblem problem_;
  std::unique_ptr<Factorization> factor_;
};

double value_at(const DiscretizedProblem& problem, const Vector& terminal);
GradientHessian gradient_hessian_at(const DiscretizedProblem& problem, const Vector& point,
                                    double h = 1e-4);
double check_critical_point(const DiscretizedProblem& problem, const GeneratorBasis& basis,
                            const Vector& origin, double h = 1e-4);

/// Samples perturbations d around mu* = Q^{-1} B^T g of the HJB argument
/// 1/2 |mu|^2_Q - <g, B mu> and returns max(cost(mu*) - cost(mu* + d)).
double hjb_minimizer_check(const Vector& gradient, const Matrix& input, const Matrix& state_gain,
                           int trials = 256, std::uint64_t seed = 1);

/// One observer epoch: the held sample and the substeps taken under it.
struct EpochTrace {
  SignalSample sample;
  StepTrace trace;
};

DiscretizedProblem from_trace(const GeneratorBasis& basis, const Matrix& h0,
                              const Vector& prior_mean, const std::vector<EpochTrace>& epochs);

}  // namespace mef::oracle
