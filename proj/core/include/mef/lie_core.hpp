#pragma once

// Matrix Lie-group machinery: a generator basis for the Lie algebra, the
// wedge/vee identification with R^d, exponential, adjoint coordinates and the
// two action matrices
//
//   upsilon(xi)     * u = wedge(u)   * xi
//   upsilon_bar(xi) * u = wedge(u)^T * xi
//
// which convert algebra coordinates into the action on an embedding vector.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mef {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Coordinates of a Lie-algebra element in a fixed generator basis.
using AlgebraVector = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by vee() when a matrix is not (numerically) in the span of the
/// generators, and by adjoint() when a conjugate leaves the algebra.
class NotInAlgebra : public std::domain_error {
 public:
  NotInAlgebra(const std::string& what, double residual)
      : std::domain_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class GeneratorBasis;

/// An element of the matrix group. Only created through identity(), the
/// exponential of a basis, products and inversion, so membership in the group
/// holds by construction. The inverse is carried alongside and updated
/// structurally.
class GroupElement {
 public:
  static GroupElement identity(int m);

  const Matrix& matrix() const { return matrix_; }
  const Matrix& inverse() const { return inverse_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }

  GroupElement operator*(const GroupElement& other) const;
  GroupElement inverted() const { return GroupElement(inverse_, matrix_); }

  /// 2-norm condition number of the matrix (via SVD).
  double condition_number() const;
  bool is_well_conditioned(double max_condition = 1e12) const {
    return condition_number() <= max_condition;
  }

 private:
  friend class GeneratorBasis;
  GroupElement(Matrix matrix, Matrix inverse)
      : matrix_(std::move(matrix)), inverse_(std::move(inverse)) {}

  Matrix matrix_;
  Matrix inverse_;
};

/// Ordered basis E_1..E_d of a matrix Lie subalgebra of gl(m).
class GeneratorBasis {
 public:
  using ExpFn = std::function<Matrix(const AlgebraVector&)>;

  static constexpr double kDefaultClosureTolerance = 1e-10;
  static constexpr double kVeeResidualTolerance = 1e-8;

  /// Validates linear independence and closure under the commutator. Throws
  /// std::invalid_argument if either fails.
  explicit GeneratorBasis(std::vector<Matrix> generators,
                          double closure_tolerance = kDefaultClosureTolerance);

  int embedding_dim() const { return m_; }
  int algebra_dim() const { return d_; }
  const Matrix& generator(int i) const { return generators_.at(i); }
  const std::vector<Matrix>& generators() const { return generators_; }

  Matrix wedge(const AlgebraVector& u) const;
  AlgebraVector vee(const Matrix& a) const;

  Matrix upsilon(const Vector& xi) const;
  Matrix upsilon_bar(const Vector& xi) const;

  /// exp(wedge(u)); uses the registered closed form when there is one.
  GroupElement exp(const AlgebraVector& u) const;
  /// Scaling-and-squaring truncated series, independent of any closed form.
  GroupElement exp_series(const AlgebraVector& u) const;

  /// d x d matrix with column i = vee(X E_i X^-1).
  Matrix adjoint(const GroupElement& x) const;

  /// Largest ||[E_i,E_j] - wedge(vee([E_i,E_j]))||_F over all pairs.
  double closure_defect() const;

  /// Registers a closed-form exponential; it must return exp(wedge(u)).
  void set_closed_form_exp(ExpFn fn) { closed_form_exp_ = std::move(fn); }
  bool has_closed_form_exp() const { return static_cast<bool>(closed_form_exp_); }

 private:
  AlgebraVector project(const Matrix& a, double* residual) const;
  void check_algebra_dim(const AlgebraVector& u) const;
  void check_embedding_dim(const Vector& xi) const;

  int m_;
  int d_;
  std::vector<Matrix> generators_;
  Matrix stacked_;  // m^2 x d, column i = vec(E_i)
  bool orthogonal_;
  Vector squared_norms_;
  Eigen::ColPivHouseholderQR<Matrix> stacked_qr_;
  ExpFn closed_form_exp_;
};

/// exp(A) by scaling and squaring: A is scaled so that ||A||_1 <= 0.5 and the
/// Taylor series truncated after 18 terms.
Matrix expm_series(const Matrix& a);

}  // namespace mef
