#pragma once

// Unit-quaternion attitude instantiation of the minimum-energy observer.
//
// Quaternions are stored as (w, x, y, z) = (q_r, q_v) and identified with the
// unit 3-sphere in R^4. The symmetry group acts on R^4 through
//   wedge(u) = [ 0    u^T  ]
//              [ -u   u_x  ]
// and q evolves as dq/dt = -wedge(omega / 2) q.

#include <cmath>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "mef/filter.hpp"
#include "mef/lie_core.hpp"

namespace mef::quat {

using Vector3 = Eigen::Vector3d;
using Vector4 = Eigen::Vector4d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix43 = Eigen::Matrix<double, 4, 3>;

struct Quaternion {
  double w = 1.0;
  Vector3 v = Vector3::Zero();

  Quaternion() = default;
  Quaternion(double w_, const Vector3& v_) : w(w_), v(v_) {}
  static Quaternion from_vector(const Eigen::Ref<const Vector>& q);
  /// Rotation by `angle` about `axis` (axis is normalized).
  static Quaternion from_axis_angle(const Vector3& axis, double angle);

  Vector4 vector() const { return Vector4(w, v.x(), v.y(), v.z()); }
  double norm() const { return std::sqrt(w * w + v.squaredNorm()); }
  Quaternion conjugate() const { return {w, -v}; }
  Quaternion normalized() const;
  Quaternion operator-() const { return {-w, -v}; }
};

/// Hamilton product; renormalized when the result drifts more than 1e-12
/// from unit length.
Quaternion quat_product(const Quaternion& q, const Quaternion& h);

Quaternion operator*(const Quaternion& q, const Quaternion& h);

Matrix3 skew(const Vector3& v);

/// Basis E_i = wedge(e_i) with the closed-form exponential
/// exp(wedge(u)) = cos|u| I + sin|u|/|u| wedge(u) registered.
GeneratorBasis quaternion_basis();

/// The origin (1, 0, 0, 0).
Vector4 origin();

/// U^vee = omega / 2.
AlgebraVector velocity_coords(const Vector3& omega);

/// z with (0, z) = q^-1 (0, z_ref) q.
Vector3 rotate_to_body(const Quaternion& q, const Vector3& z_ref);

/// Implicit measurement matrix with C(z, z_ref) q = 0 for z = rotate_to_body(q, z_ref).
Matrix4 measurement_matrix(const Vector3& z, const Vector3& z_ref);

/// Derivative of C(z) q_hat with respect to z: [-q_v^T; q_r I + q_v x].
Matrix43 output_jacobian(const Quaternion& q_hat);

/// Closed-form quaternion exponential exp(wedge(u)) as a 4x4 matrix.
Matrix4 exp_matrix(const Vector3& u);

/// q(t + dt) = q(t) * (cos(|w| dt / 2), sin(|w| dt / 2) w / |w|).
Quaternion integrate(const Quaternion& q, const Vector3& omega, double dt);

/// X = exp(theta delta) with q = (cos theta, sin theta delta), theta in [0, pi],
/// so that X^-1 (1, 0, 0, 0) = q.
GroupElement group_from_quaternion(const GeneratorBasis& basis, const Quaternion& q);

/// 2 acos(|<q, q_hat>|) in [0, pi], evaluated as 2 atan2(|vec(q* q_hat)|, |scalar(q* q_hat)|);
/// invariant under q -> -q.
double attitude_error_angle(const Quaternion& q, const Quaternion& q_hat);

struct AttitudeScenario {
  std::function<Vector3(double)> omega_fn;  // body angular velocity, rad/s
  std::function<Vector3(double)> ref_fn;    // unit inertial reference vector
  Quaternion q0;
  double duration = 100.0;
  double sensor_dt = 0.1;
};

/// omega(t) = (0.1 cos(0.1 t), 0, 0.2), z_ref(t) = (sin t, 0, cos t),
/// q0 = identity, 100 s at 0.1 s.
AttitudeScenario reference_scenario();

struct NoiseModel {
  Matrix3 gyro_cov = 0.01 * 0.01 * Matrix3::Identity();
  Matrix3 vector_cov = Matrix3::Identity();
  std::uint64_t seed = 0;
};

/// Moore-Penrose pseudo-inverse with singular values below
/// 1e-12 sigma_max treated as zero.
Matrix pseudo_inverse(const Matrix& a);

/// Builds the zero-order-held sensor interval for the observer:
/// U = omega/2, C = C(z_meas, z_ref), y = 0, B = upsilon(xi0) Ad(X_hat),
/// Q^-1 = gyro_cov / 4, R = pinv(J vector_cov J^T) with J = output_jacobian(q_hat).
SignalSample build_sample(const GeneratorBasis& basis, const Quaternion& q_hat,
                          const GroupElement& x_hat, const Vector3& omega_meas,
                          const Vector3& z_meas, const Vector3& z_ref,
                          const NoiseModel& gains, double valid_until);

}  // namespace mef::quat
