#pragma once

#include <Eigen/Core>

namespace ctin {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion in Hamilton convention, scalar first (w, x, y, z).
///
/// Represents the body-to-navigation rotation R_b^n. The matrix transpose
/// (R_b^n)^T corresponds to the quaternion conjugate. Every constructor
/// normalizes, so the norm is 1 to rounding.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  /// Normalizes the given components. Throws DataError on a zero or
  /// non-finite input.
  UnitQuaternion(double w, double x, double y, double z);

  static UnitQuaternion identity() { return {}; }

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  bool operator==(const UnitQuaternion&) const = default;

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b);
UnitQuaternion quat_conj(const UnitQuaternion& q);

/// exp of the pure quaternion (0, dt * omega / 2): a rotation by |omega| dt
/// about omega / |omega|. Below 1e-12 rad it switches to the second-order
/// series so the axis division never happens.
UnitQuaternion quat_exp(const Vec3& omega, double dt);

/// q * (0, v) * conj(q).
Vec3 rotate_vec(const UnitQuaternion& q, const Vec3& v);

UnitQuaternion yaw_rotation(double theta);
UnitQuaternion pitch_rotation(double theta);

Mat3 quat_to_matrix(const UnitQuaternion& q);

/// Heading angle (rotation about +Z) of the body x-axis, in (-pi, pi].
double quat_to_yaw(const UnitQuaternion& q);

double quat_norm(double w, double x, double y, double z);

}  // namespace ctin
