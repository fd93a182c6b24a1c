#include "mef/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace mef::oracle {

namespace {

using Triplet = Eigen::Triplet<double>;
using SparseMatrix = Eigen::SparseMatrix<double>;

// S with S^T S = A for symmetric PSD A.
Matrix psd_root(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return root.asDiagonal() * eig.eigenvectors().transpose();
}

void add_block(std::vector<Triplet>& out, Eigen::Index row, Eigen::Index col, const Matrix& block) {
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      if (block(i, j) != 0.0) out.emplace_back(row + i, col + j, block(i, j));
    }
  }
}

}  // namespace

double DiscretizedProblem::horizon() const {
  double t = 0.0;
  for (const auto& s : steps) t += s.dt;
  return t;
}

void DiscretizedProblem::validate() const {
  const auto m = h0.rows();
  if (h0.cols() != m || m == 0) throw DimensionError("H0 must be square and non-empty");
  if (prior_mean.size() != m) throw DimensionError("prior mean must have length m");
  for (const auto& s : steps) {
    if (!(s.dt > 0.0)) throw std::invalid_argument("step dt must be > 0");
    if (s.delta.rows() != m || s.delta.cols() != m) throw DimensionError("Delta must be m x m");
    if (s.input.rows() != m) throw DimensionError("B must have m rows");
    if (s.state_gain.rows() != s.input.cols() || s.state_gain.cols() != s.input.cols()) {
      throw DimensionError("Q must be l x l");
    }
    if (s.output.cols() != m) throw DimensionError("C must have m columns");
    if (s.x_hat_inv.rows() != m || s.x_hat_inv.cols() != m) {
      throw DimensionError("observer inverse must be m x m");
    }
    const auto n = s.output.rows();
    if (s.measurement.size() != n) throw DimensionError("y must have n entries");
    if (s.output_gain.rows() != n || s.output_gain.cols() != n) {
      throw DimensionError("R must be n x n");
    }
  }
}

// Unknowns x = (e_0..e_N, mu_0..mu_{N-1}); cost 1/2 |A x - b|^2; constraints E x = f.
// The augmented system [[I, A, 0], [A^T, 0, E^T], [0, E, 0]] (r, x, lambda) = (b, 0, f)
// gives the residual r = b - A x directly. Only f depends on the terminal point.
struct ValueOracle::Factorization {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  Vector rhs;
  Eigen::Index residual_rows = 0;
  Eigen::Index terminal_offset = 0;
};

ValueOracle::ValueOracle(DiscretizedProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  const auto m = problem_.h0.rows();
  const auto n_steps = static_cast<Eigen::Index>(problem_.steps.size());

  std::vector<Eigen::Index> mu_offset(problem_.steps.size());
  Eigen::Index cols = m * (n_steps + 1);
  Eigen::Index rows = m;
  for (Eigen::Index k = 0; k < n_steps; ++k) {
    const auto& s = problem_.steps[k];
    mu_offset[k] = cols;
    cols += s.input.cols();
    rows += s.input.cols() + s.output.rows();
  }
  const Eigen::Index constraints = m * (n_steps + 1);

  std::vector<Triplet> a;
  Vector b = Vector::Zero(rows);
  std::vector<Triplet> e;

  const Matrix prior_root = psd_root(problem_.h0);
  add_block(a, 0, 0, prior_root);
  b.head(m) = prior_root * problem_.prior_mean;
  Eigen::Index row = m;
  const Matrix identity = Matrix::Identity(m, m);
  for (Eigen::Index k = 0; k < n_steps; ++k) {
    const auto& s = problem_.steps[k];
    const double root_dt = std::sqrt(s.dt);
    const auto l = s.input.cols();
    if (l > 0) {
      Eigen::LLT<Matrix> llt(s.state_gain);
      if (llt.info() != Eigen::Success) throw std::invalid_argument("Q is not positive definite");
      add_block(a, row, mu_offset[k], root_dt * Matrix(llt.matrixU()));
      row += l;
    }
    const Matrix out_root = root_dt * psd_root(s.output_gain);
    add_block(a, row, k * m, out_root * s.output * s.x_hat_inv);
    b.segment(row, s.output.rows()) = out_root * s.measurement;
    row += s.output.rows();

    add_block(e, k * m, (k + 1) * m, identity);
    add_block(e, k * m, k * m, -(identity + s.dt * s.delta));
    if (l > 0) add_block(e, k * m, mu_offset[k], -s.dt * s.input);
  }
  add_block(e, n_steps * m, n_steps * m, identity);

  const Eigen::Index size = rows + cols + constraints;
  std::vector<Triplet> k_triplets;
  k_triplets.reserve(rows + 2 * (a.size() + e.size()));
  for (Eigen::Index i = 0; i < rows; ++i) k_triplets.emplace_back(i, i, 1.0);
  for (const auto& t : a) {
    k_triplets.emplace_back(t.row(), rows + t.col(), t.value());
    k_triplets.emplace_back(rows + t.col(), t.row(), t.value());
  }
  for (const auto& t : e) {
    k_triplets.emplace_back(rows + cols + t.row(), rows + t.col(), t.value());
    k_triplets.emplace_back(rows + t.col(), rows + cols + t.row(), t.value());
  }
  SparseMatrix kkt(size, size);
  kkt.setFromTriplets(k_triplets.begin(), k_triplets.end());
  kkt.makeCompressed();

  factor_ = std::make_unique<Factorization>();
  factor_->lu.compute(kkt);
  if (factor_->lu.info() != Eigen::Success) {
    throw InfeasibleTerminal("augmented system is singular: " + factor_->lu.lastErrorMessage());
  }
  factor_->rhs = Vector::Zero(size);
  factor_->rhs.head(rows) = b;
  factor_->residual_rows = rows;
  factor_->terminal_offset = rows + cols + n_steps * m;
}

ValueOracle::~ValueOracle() = default;
ValueOracle::ValueOracle(ValueOracle&&) noexcept = default;
ValueOracle& ValueOracle::operator=(ValueOracle&&) noexcept = default;

Vector ValueOracle::residual(const Vector& terminal) const {
  const auto m = problem_.h0.rows();
  if (terminal.size() != m) throw DimensionError("terminal point must have length m");
  Vector rhs = factor_->rhs;
  rhs.segment(factor_->terminal_offset, m) = terminal;
  const Vector sol = factor_->lu.solve(rhs);
  if (factor_->lu.info() != Eigen::Success || !sol.allFinite()) {
    throw InfeasibleTerminal("augmented solve failed");
  }
  return sol.head(factor_->residual_rows);
}

double ValueOracle::value(const Vector& terminal) const {
  return 0.5 * residual(terminal).squaredNorm();
}

GradientHessian ValueOracle::gradient_hessian(const Vector& terminal, double h) const {
  const auto m = problem_.h0.rows();
  const Vector r = residual(terminal);
  Matrix jac(r.size(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Vector step = Vector::Zero(m);
    step(i) = h;
    jac.col(i) = (residual(terminal + step) - residual(terminal - step)) / (2.0 * h);
  }
  GradientHessian out;
  out.gradient = jac.transpose() * r;
  const Matrix hess = jac.transpose() * jac;
  out.hessian = 0.5 * (hess + hess.transpose());
  return out;
}

double ValueOracle::critical_point_residual(const GeneratorBasis& basis, const Vector& origin,
                                            double h) const {
  const Matrix tangent = basis.upsilon(origin);
  const Vector r = residual(origin);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < tangent.cols(); ++i) {
    const Vector step = h * tangent.col(i);
    const Vector slope = (residual(origin + step) - residual(origin - step)) / (2.0 * h);
    worst = std::max(worst, std::abs(r.dot(slope)));
  }
  return worst;
}

double value_at(const DiscretizedProblem& problem, const Vector& terminal) {
  return ValueOracle(problem).value(terminal);
}

GradientHessian gradient_hessian_at(const DiscretizedProblem& problem, const Vector& point,
                                    double h) {
  return ValueOracle(problem).gradient_hessian(point, h);
}

double check_critical_point(const DiscretizedProblem& problem, const GeneratorBasis& basis,
                            const Vector& origin, double h) {
  return ValueOracle(problem).critical_point_residual(basis, origin, h);
}

double hjb_minimizer_check(const Vector& gradient, const Matrix& input, const Matrix& state_gain,
                           int trials, std::uint64_t seed) {
  if (input.rows() != gradient.size()) throw DimensionError("B must have as many rows as g");
  if (state_gain.rows() != input.cols() || state_gain.cols() != input.cols()) {
    throw DimensionError("Q must be l x l");
  }
  Eigen::LLT<Matrix> llt(state_gain);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("Q is not positive definite");
  const Vector linear = input.transpose() * gradient;
  const Vector mu_star = llt.solve(linear);
  auto cost = [&](const Vector& mu) { return 0.5 * mu.dot(state_gain * mu) - linear.dot(mu); };
  const double best = cost(mu_star);

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const double scale = std::max(1.0, mu_star.norm());
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < trials; ++k) {
    Vector d(mu_star.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = normal(gen);
    d *= scale * std::pow(10.0, -(k % 8));
    worst = std::max(worst, best - cost(mu_star + d));
  }
  return worst;
}

DiscretizedProblem from_trace(const GeneratorBasis& basis, const Matrix& h0,
                              const Vector& prior_mean, const std::vector<EpochTrace>& epochs) {
  DiscretizedProblem problem;
  problem.h0 = h0;
  problem.prior_mean = prior_mean;
  for (const auto& epoch : epochs) {
    const SignalSample& s = epoch.sample;
    for (const auto& sub : epoch.trace.substeps) {
      problem.steps.push_back({sub.dt, basis.wedge(sub.delta), s.input_matrix, s.state_gain,
                               s.output_matrix, sub.x_hat_inv, s.output, s.output_gain});
    }
  }
  problem.validate();
  return problem;
}

}  // namespace mef::oracle
