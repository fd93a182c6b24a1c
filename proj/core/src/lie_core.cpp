#include "mef/lie_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mef {

namespace {

constexpr int kSeriesTerms = 18;
constexpr double kScaledNorm = 0.5;

Eigen::Map<const Vector> vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

}  // namespace

Matrix expm_series(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > kScaledNorm) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kScaledNorm)));
  }
  const Matrix scaled = a / std::ldexp(1.0, squarings);

  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= kSeriesTerms; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) {
    result = result * result;
  }
  return result;
}

GroupElement GroupElement::identity(int m) {
  return GroupElement(Matrix::Identity(m, m), Matrix::Identity(m, m));
}

GroupElement GroupElement::operator*(const GroupElement& other) const {
  if (dim() != other.dim()) {
    throw DimensionError("group product: dimension mismatch");
  }
  return GroupElement(matrix_ * other.matrix_, other.inverse_ * inverse_);
}

double GroupElement::condition_number() const {
  Eigen::JacobiSVD<Matrix> svd(matrix_);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

GeneratorBasis::GeneratorBasis(std::vector<Matrix> generators, double closure_tolerance)
    : generators_(std::move(generators)) {
  if (generators_.empty()) {
    throw std::invalid_argument("generator basis must be non-empty");
  }
  m_ = static_cast<int>(generators_.front().rows());
  d_ = static_cast<int>(generators_.size());
  if (m_ <= 0) throw std::invalid_argument("generators must be non-empty matrices");

  stacked_.resize(static_cast<Eigen::Index>(m_) * m_, d_);
  for (int i = 0; i < d_; ++i) {
    const Matrix& e = generators_[i];
    if (e.rows() != m_ || e.cols() != m_) {
      throw std::invalid_argument("generators must all be square and of equal size");
    }
    stacked_.col(i) = vec(e);
  }

  stacked_qr_.compute(stacked_);
  if (stacked_qr_.rank() < d_) {
    throw std::invalid_argument("generators are linearly dependent");
  }

  const Matrix gram = stacked_.transpose() * stacked_;
  squared_norms_ = gram.diagonal();
  const Matrix off = gram - Matrix(squared_norms_.asDiagonal());
  orthogonal_ = off.cwiseAbs().maxCoeff() == 0.0;

  const double defect = closure_defect();
  if (!(defect <= closure_tolerance)) {
    std::ostringstream os;
    os << "generators do not span a Lie subalgebra (commutator defect " << defect << ")";
    throw std::invalid_argument(os.str());
  }
}

void GeneratorBasis::check_algebra_dim(const AlgebraVector& u) const {
  if (u.size() != d_) {
    throw DimensionError("algebra vector has length " + std::to_string(u.size()) +
                         ", expected " + std::to_string(d_));
  }
}

void GeneratorBasis::check_embedding_dim(const Vector& xi) const {
  if (xi.size() != m_) {
    throw DimensionError("embedding vector has length " + std::to_string(xi.size()) +
                         ", expected " + std::to_string(m_));
  }
}

Matrix GeneratorBasis::wedge(const AlgebraVector& u) const {
  check_algebra_dim(u);
  Matrix a = Matrix::Zero(m_, m_);
  for (int i = 0; i < d_; ++i) {
    if (u(i) != 0.0) a += u(i) * generators_[i];
  }
  return a;
}

AlgebraVector GeneratorBasis::project(const Matrix& a, double* residual) const {
  const auto v = vec(a);
  AlgebraVector u;
  if (orthogonal_) {
    // Exact for bases with +-1 entries and power-of-two squared norms.
    u = (stacked_.transpose() * v).cwiseQuotient(squared_norms_);
  } else {
    u = stacked_qr_.solve(Vector(v));
  }
  *residual = (stacked_ * u - v).norm();
  return u;
}

AlgebraVector GeneratorBasis::vee(const Matrix& a) const {
  if (a.rows() != m_ || a.cols() != m_) {
    throw DimensionError("vee: matrix is not " + std::to_string(m_) + "x" + std::to_string(m_));
  }
  double residual = 0.0;
  AlgebraVector u = project(a, &residual);
  if (residual > kVeeResidualTolerance * std::max(1.0, a.norm())) {
    std::ostringstream os;
    os << "matrix is not in the Lie algebra (projection residual " << residual << ")";
    throw NotInAlgebra(os.str(), residual);
  }
  return u;
}

Matrix GeneratorBasis::upsilon(const Vector& xi) const {
  check_embedding_dim(xi);
  Matrix out(m_, d_);
  for (int i = 0; i < d_; ++i) out.col(i) = generators_[i] * xi;
  return out;
}

Matrix GeneratorBasis::upsilon_bar(const Vector& xi) const {
  check_embedding_dim(xi);
  Matrix out(m_, d_);
  for (int i = 0; i < d_; ++i) out.col(i) = generators_[i].transpose() * xi;
  return out;
}

GroupElement GeneratorBasis::exp(const AlgebraVector& u) const {
  check_algebra_dim(u);
  if (!closed_form_exp_) return exp_series(u);
  return GroupElement(closed_form_exp_(u), closed_form_exp_(-u));
}

GroupElement GeneratorBasis::exp_series(const AlgebraVector& u) const {
  check_algebra_dim(u);
  return GroupElement(expm_series(wedge(u)), expm_series(wedge(-u)));
}

Matrix GeneratorBasis::adjoint(const GroupElement& x) const {
  if (x.dim() != m_) throw DimensionError("adjoint: group element has wrong dimension");
  Matrix ad(d_, d_);
  for (int i = 0; i < d_; ++i) {
    ad.col(i) = vee(x.matrix() * generators_[i] * x.inverse());
  }
  return ad;
}

double GeneratorBasis::closure_defect() const {
  double worst = 0.0;
  for (int i = 0; i < d_; ++i) {
    for (int j = i + 1; j < d_; ++j) {
      const Matrix c = generators_[i] * generators_[j] - generators_[j] * generators_[i];
      double residual = 0.0;
      project(c, &residual);
      worst = std::max(worst, residual);
    }
  }
  return worst;
}

}  // namespace mef
