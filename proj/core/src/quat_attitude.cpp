#include "mef/quat_attitude.hpp"

#include <algorithm>
#include <cmath>

namespace mef::quat {

namespace {

constexpr double kRenormalizeDrift = 1e-12;
constexpr double kPinvCutoff = 1e-12;

Matrix4 wedge4(const Vector3& u) {
  Matrix4 a = Matrix4::Zero();
  a.block<1, 3>(0, 1) = u.transpose();
  a.block<3, 1>(1, 0) = -u;
  a.block<3, 3>(1, 1) = skew(u);
  return a;
}

}  // namespace

Quaternion Quaternion::from_vector(const Eigen::Ref<const Vector>& q) {
  if (q.size() != 4) throw DimensionError("quaternion vector must have 4 entries");
  return {q(0), Vector3(q(1), q(2), q(3))};
}

Quaternion Quaternion::from_axis_angle(const Vector3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) return {};
  return {std::cos(0.5 * angle), std::sin(0.5 * angle) * axis / n};
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return {w / n, v / n};
}

Quaternion quat_product(const Quaternion& q, const Quaternion& h) {
  Quaternion out{q.w * h.w - q.v.dot(h.v), q.w * h.v + h.w * q.v + q.v.cross(h.v)};
  if (std::abs(out.norm() - 1.0) > kRenormalizeDrift) out = out.normalized();
  return out;
}

Quaternion operator*(const Quaternion& q, const Quaternion& h) { return quat_product(q, h); }

Matrix3 skew(const Vector3& v) {
  Matrix3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Matrix4 exp_matrix(const Vector3& u) {
  const double theta = u.norm();
  if (theta == 0.0) return Matrix4::Identity();
  // sin(theta)/theta loses nothing for small theta; no series switch needed.
  return std::cos(theta) * Matrix4::Identity() + (std::sin(theta) / theta) * wedge4(u);
}

GeneratorBasis quaternion_basis() {
  std::vector<Matrix> generators;
  for (int i = 0; i < 3; ++i) generators.emplace_back(wedge4(Vector3::Unit(i)));
  GeneratorBasis basis(std::move(generators));
  basis.set_closed_form_exp([](const AlgebraVector& u) -> Matrix {
    return exp_matrix(Vector3(u(0), u(1), u(2)));
  });
  return basis;
}

Vector4 origin() { return Vector4(1.0, 0.0, 0.0, 0.0); }

AlgebraVector velocity_coords(const Vector3& omega) { return 0.5 * omega; }

Vector3 rotate_to_body(const Quaternion& q, const Vector3& z_ref) {
  // Written out rather than via quat_product so that non-unit intermediate
  // values are never renormalized.
  const Quaternion& c = q.conjugate();
  const Quaternion a{-c.v.dot(z_ref), c.w * z_ref + c.v.cross(z_ref)};
  return a.w * q.v + q.w * a.v + a.v.cross(q.v);
}

Matrix4 measurement_matrix(const Vector3& z, const Vector3& z_ref) {
  Matrix4 c = Matrix4::Zero();
  c.block<1, 3>(0, 1) = (z_ref - z).transpose();
  c.block<3, 1>(1, 0) = z - z_ref;
  c.block<3, 3>(1, 1) = -skew(z + z_ref);
  return c;
}

Matrix43 output_jacobian(const Quaternion& q_hat) {
  Matrix43 j;
  j.row(0) = -q_hat.v.transpose();
  j.bottomRows<3>() = q_hat.w * Matrix3::Identity() + skew(q_hat.v);
  return j;
}

Quaternion integrate(const Quaternion& q, const Vector3& omega, double dt) {
  const double rate = omega.norm();
  if (rate == 0.0) return q;
  const double half = 0.5 * rate * dt;
  return q * Quaternion{std::cos(half), std::sin(half) * omega / rate};
}

GroupElement group_from_quaternion(const GeneratorBasis& basis, const Quaternion& q) {
  const double s = q.v.norm();
  if (s == 0.0) {
    if (q.w >= 0.0) return GroupElement::identity(4);
    return basis.exp(AlgebraVector(Vector3(M_PI, 0.0, 0.0)));
  }
  const double theta = std::atan2(s, q.w);
  return basis.exp(AlgebraVector(theta * q.v / s));
}

double attitude_error_angle(const Quaternion& q, const Quaternion& q_hat) {
  const Quaternion e = q.conjugate() * q_hat;
  return 2.0 * std::atan2(e.v.norm(), std::abs(e.w));
}

AttitudeScenario reference_scenario() {
  AttitudeScenario s;
  s.omega_fn = [](double t) { return Vector3(0.1 * std::cos(0.1 * t), 0.0, 0.2); };
  s.ref_fn = [](double t) { return Vector3(std::sin(t), 0.0, std::cos(t)); };
  s.q0 = Quaternion{};
  s.duration = 100.0;
  s.sensor_dt = 0.1;
  return s;
}

Matrix pseudo_inverse(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  if (sigma.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  const double cutoff = kPinvCutoff * sigma(0);
  Vector inv = Vector::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

SignalSample build_sample(const GeneratorBasis& basis, const Quaternion& q_hat,
                          const GroupElement& x_hat, const Vector3& omega_meas,
                          const Vector3& z_meas, const Vector3& z_ref,
                          const NoiseModel& gains, double valid_until) {
  if (basis.embedding_dim() != 4 || basis.algebra_dim() != 3 || x_hat.dim() != 4) {
    throw DimensionError("build_sample requires the quaternion basis");
  }
  SignalSample s;
  s.velocity = velocity_coords(omega_meas);
  s.output_matrix = measurement_matrix(z_meas, z_ref);
  s.output = Vector::Zero(4);
  s.input_matrix = basis.upsilon(origin()) * basis.adjoint(x_hat);
  const Matrix3 q_inv = 0.25 * gains.gyro_cov;
  s.state_gain = q_inv.inverse();
  const Matrix43 j = output_jacobian(q_hat);
  const Matrix r_inv = j * gains.vector_cov * j.transpose();
  s.output_gain = pseudo_inverse(0.5 * (r_inv + r_inv.transpose()));
  s.valid_until = valid_until;
  return s;
}

}  // namespace mef::quat
