/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Quaternion and rotation algebra.
//
// Conventions: Hamilton product, scalar first (w, x, y, z). A quaternion maps
// body-frame vectors into the navigation frame (north-east-down). Euler angles
// are Z-Y-X intrinsic (yaw, pitch, roll), reported in degrees.
//
// The Basic* templates are shared by the double-precision API below and by
// the training code, which instantiates them with ad::Var.

#include "gyrocal/autodiff.hpp"

#include <array>
#include <cmath>
#include <span>

namespace gyrocal
{

template<typename T>
using BasicVec3 = std::array<T, 3>;
using Vec3 = BasicVec3<double>;

// Row-major 3x3.
using Mat3 = std::array<double, 9>;

template<typename T>
struct BasicQuat
{
  T w{1.0};
  T x{0.0};
  T y{0.0};
  T z{0.0};

  // Component-wise; q and -q compare unequal.
  friend bool operator==(const BasicQuat&, const BasicQuat&) = default;
};
using Quat = BasicQuat<double>;

struct RotMat
{
  Mat3 m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int row, int col) const { return m[row * 3 + col]; }
  double& operator()(int row, int col) { return m[row * 3 + col]; }
};

struct EulerAngles
{
  double roll_deg = 0.0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  // |pitch| within 1e-6 deg of 90 deg: roll and yaw are not separable.
  bool near_gimbal_lock = false;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;
inline constexpr double kStandardGravity = 9.81;

template<typename T>
BasicQuat<T> Multiply(const BasicQuat<T>& a, const BasicQuat<T>& b)
{
  using ad::AffineDot;
  const std::array<T, 4> lhs{a.w, a.x, a.y, a.z};
  const T nbx = -b.x;
  const T nby = -b.y;
  const T nbz = -b.z;
  const std::array<T, 4> rw{b.w, nbx, nby, nbz};
  const std::array<T, 4> rx{b.x, b.w, b.z, nby};
  const std::array<T, 4> ry{b.y, nbz, b.w, b.x};
  const std::array<T, 4> rz{b.z, b.y, nbx, b.w};
  const T zero{0.0};
  return {AffineDot(std::span<const T>(lhs), std::span<const T>(rw), zero),
          AffineDot(std::span<const T>(lhs), std::span<const T>(rx), zero),
          AffineDot(std::span<const T>(lhs), std::span<const T>(ry), zero),
          AffineDot(std::span<const T>(lhs), std::span<const T>(rz), zero)};
}

template<typename T>
T SquaredNorm(const BasicQuat<T>& q)
{
  const std::array<T, 4> c{q.w, q.x, q.y, q.z};
  return ad::AffineDot(std::span<const T>(c), std::span<const T>(c), T{0.0});
}

// Throws NumericError on a zero-norm (or non-finite) quaternion.
template<typename T>
BasicQuat<T> Normalize(const BasicQuat<T>& q)
{
  using std::sqrt;
  const T norm = sqrt(SquaredNorm(q));
  const double n = ad::Value(norm);
  if (!(n > 0.0) || !std::isfinite(n))
    throw NumericError("cannot normalize a zero-norm or non-finite quaternion");
  const T inv = T{1.0} / norm;
  return {q.w * inv, q.x * inv, q.y * inv, q.z * inv};
}

template<typename T>
BasicQuat<T> Conjugate(const BasicQuat<T>& q)
{
  return {q.w, -q.x, -q.y, -q.z};
}

// normalize(q ⊗ [1, omega*dt/2]); no input validation.
template<typename T>
BasicQuat<T> IntegrateStepUnchecked(const BasicQuat<T>& q, const BasicVec3<T>& omega, double dt)
{
  const double half_dt = 0.5 * dt;
  const BasicQuat<T> delta{T{1.0}, omega[0] * half_dt, omega[1] * half_dt, omega[2] * half_dt};
  return Normalize(Multiply(q, delta));
}

// Euclidean distance between the component vectors after flipping `b` into
// the hemisphere of `a`. No unit-norm validation.
template<typename T>
T QuatDiffUnchecked(const BasicQuat<T>& a, const BasicQuat<T>& b)
{
  using std::sqrt;
  const double dot = ad::Value(a.w) * ad::Value(b.w) + ad::Value(a.x) * ad::Value(b.x) +
                     ad::Value(a.y) * ad::Value(b.y) + ad::Value(a.z) * ad::Value(b.z);
  const double sign = dot < 0.0 ? -1.0 : 1.0;
  const std::array<T, 4> d{a.w - b.w * sign, a.x - b.x * sign, a.y - b.y * sign,
                           a.z - b.z * sign};
  return sqrt(ad::AffineDot(std::span<const T>(d), std::span<const T>(d), T{0.0}));
}

// Z-Y-X yaw in radians.
template<typename T>
T YawRadians(const BasicQuat<T>& q)
{
  using std::atan2;
  return atan2(T{2.0} * (q.w * q.z + q.x * q.y), T{1.0} - T{2.0} * (q.y * q.y + q.z * q.z));
}

// Rotation about the navigation z axis by `yaw` radians.
template<typename T>
BasicQuat<T> YawQuat(const T& yaw)
{
  using std::cos;
  using std::sin;
  const T half = yaw * 0.5;
  return {cos(half), T{0.0}, T{0.0}, sin(half)};
}

// Double-precision API with validation.

Quat QuatMul(const Quat& a, const Quat& b);

// Rejects non-finite inputs and dt <= 0.
Quat IntegrateStep(const Quat& q, const Vec3& omega, double dt);

// Rejects inputs whose norm deviates from 1 by more than 1e-6.
double QuatDiff(const Quat& a, const Quat& b);

double Dot(const Quat& a, const Quat& b);
Quat Negate(const Quat& q);

// Rotation by |rotvec| radians about rotvec / |rotvec|.
Quat QuatExp(const Vec3& rotvec);

// Rotation angle in [0, pi].
double RotationAngle(const Quat& q);

RotMat QuatToRotMat(const Quat& q);
Quat RotMatToQuat(const RotMat& r);
RotMat Transpose(const RotMat& r);
RotMat MatMul(const RotMat& a, const RotMat& b);

// Axis-angle vector with norm in [0, pi]. Rejects inputs that are not proper
// rotations (orthogonality or determinant off by more than 1e-6).
Vec3 So3Log(const RotMat& r);

EulerAngles QuatToEuler(const Quat& q);
Quat QuatFromEuler(double roll_deg, double pitch_deg, double yaw_deg);

// Attitude with roll and pitch levelled from a quasi-static accelerometer
// reading (specific force, m/s^2) and yaw = 0. Rejects readings whose norm is
// not within 20% of standard gravity.
Quat QuatFromGravity(const Vec3& accel);

// Specific force an ideal accelerometer reads at rest in attitude `q`.
Vec3 GravitySpecificForce(const Quat& q);

Vec3 Rotate(const Quat& q, const Vec3& v);

// Spherical interpolation, `b` hemisphere-aligned to `a`; u in [0, 1].
Quat Slerp(const Quat& a, const Quat& b, double u);

} // namespace gyrocal
