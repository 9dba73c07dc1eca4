#pragma once

#include <cmath>

#include "cml/types.hpp"

namespace cml {

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v(2), v(1),
       v(2), 0.0, -v(0),
      -v(1), v(0), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Rodrigues formula, exact on SO(3) for any rotation vector.
/// Below kSmallAngle the sin/cos coefficients switch to their
/// second-order Taylor expansions to avoid 0/0.
inline Mat3 exp_so3(const Vec3& v) {
  constexpr double kSmallAngle = 1e-8;
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta)/theta
  double b;  // (1 - cos(theta))/theta^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(v);
  return Mat3::Identity() + a * k + b * k * k;
}

/// Intrinsic Z-Y-X decomposition, R = Rz(yaw) * Ry(pitch) * Rx(roll).
/// Returned as (roll, pitch, yaw). At gimbal lock (|pitch| = pi/2)
/// yaw is set to 0 and roll absorbs the remaining rotation.
inline Vec3 euler_zyx(const Mat3& r) {
  const double sin_pitch = -r(2, 0);
  if (sin_pitch >= 1.0 - 1e-12) {
    return Vec3(std::atan2(r(0, 1), r(1, 1)), M_PI / 2.0, 0.0);
  }
  if (sin_pitch <= -1.0 + 1e-12) {
    return Vec3(-std::atan2(r(0, 1), r(1, 1)), -M_PI / 2.0, 0.0);
  }
  const double pitch = std::asin(sin_pitch);
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return Vec3(roll, pitch, yaw);
}

inline double yaw_of(const Mat3& r) { return euler_zyx(r)(2); }

/// Rotation about +z by `yaw`.
inline Mat3 rot_z(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Mat3 m;
  m << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return m;
}

inline double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return orthonormality_error(r) < tol && std::abs(r.determinant() - 1.0) < tol;
}

}  // namespace cml
