#include "ctin/geometry.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "ctin/errors.hpp"

namespace ctin {

namespace {
constexpr double kSmallAngle = 1e-12;
}

double quat_norm(double w, double x, double y, double z) {
  return std::sqrt(w * w + x * x + y * y + z * z);
}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double n = quat_norm(w, x, y, z);
  if (!std::isfinite(n) || n == 0.0) {
    throw DataError("quaternion with zero or non-finite norm");
  }
  // Already unit to rounding: keep the bits, so text round trips are exact.
  const double s = std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon() ? 1.0 : n;
  w_ = w / s;
  x_ = x / s;
  y_ = y / s;
  z_ = z / s;
}

UnitQuaternion quat_mul(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w() * b.w() - a.x() * b.x() - a.y() * b.y() - a.z() * b.z(),
          a.w() * b.x() + a.x() * b.w() + a.y() * b.z() - a.z() * b.y(),
          a.w() * b.y() - a.x() * b.z() + a.y() * b.w() + a.z() * b.x(),
          a.w() * b.z() + a.x() * b.y() - a.y() * b.x() + a.z() * b.w()};
}

UnitQuaternion quat_conj(const UnitQuaternion& q) {
  return {q.w(), -q.x(), -q.y(), -q.z()};
}

UnitQuaternion quat_exp(const Vec3& omega, double dt) {
  const Vec3 half = 0.5 * dt * omega;
  const double theta = 2.0 * half.norm();
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    const double s = 1.0 - t2 / 24.0;
    return {1.0 - t2 / 8.0, s * half.x(), s * half.y(), s * half.z()};
  }
  const double s = std::sin(0.5 * theta) / (0.5 * theta);
  return {std::cos(0.5 * theta), s * half.x(), s * half.y(), s * half.z()};
}

Vec3 rotate_vec(const UnitQuaternion& q, const Vec3& v) {
  // t = 2 (q_v x v); v' = v + w t + q_v x t
  const Vec3 qv(q.x(), q.y(), q.z());
  const Vec3 t = 2.0 * qv.cross(v);
  return v + q.w() * t + qv.cross(t);
}

UnitQuaternion yaw_rotation(double theta) {
  return {std::cos(0.5 * theta), 0.0, 0.0, std::sin(0.5 * theta)};
}

UnitQuaternion pitch_rotation(double theta) {
  return {std::cos(0.5 * theta), 0.0, std::sin(0.5 * theta), 0.0};
}

Mat3 quat_to_matrix(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

double quat_to_yaw(const UnitQuaternion& q) {
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()),
                    1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

}  // namespace ctin
