/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/quat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gyrocal
{
namespace
{
// Unit-norm tolerance for quaternion inputs.
constexpr double kUnitTolerance = 1e-6;

// Orthogonality / determinant tolerance for rotation matrix inputs.
constexpr double kRotationTolerance = 1e-6;

// Below this angle the log map uses the first-order series.
constexpr double kSmallAngle = 1e-9;

// Above pi - this, the axis comes from the symmetric part.
constexpr double kNearPi = 1e-3;

bool IsFinite(const Quat& q)
{
  return std::isfinite(q.w) && std::isfinite(q.x) && std::isfinite(q.y) && std::isfinite(q.z);
}

void RequireUnit(const Quat& q, const char* what)
{
  const double norm = std::sqrt(SquaredNorm(q));
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitTolerance)
    throw InvalidArgument(std::string(what) + ": quaternion is not unit (norm " +
                          std::to_string(norm) + ")");
}

double Determinant(const RotMat& r)
{
  return r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
         r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
         r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
}
} // namespace

Quat QuatMul(const Quat& a, const Quat& b) { return Multiply(a, b); }

Quat IntegrateStep(const Quat& q, const Vec3& omega, double dt)
{
  if (!IsFinite(q) || !std::isfinite(omega[0]) || !std::isfinite(omega[1]) ||
      !std::isfinite(omega[2]) || !std::isfinite(dt))
    throw InvalidArgument("IntegrateStep: non-finite input");
  if (!(dt > 0.0))
    throw InvalidArgument("IntegrateStep: dt must be positive");
  return IntegrateStepUnchecked(q, omega, dt);
}

double QuatDiff(const Quat& a, const Quat& b)
{
  RequireUnit(a, "QuatDiff");
  RequireUnit(b, "QuatDiff");
  return QuatDiffUnchecked(a, b);
}

double Dot(const Quat& a, const Quat& b) { return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z; }

Quat Negate(const Quat& q) { return {-q.w, -q.x, -q.y, -q.z}; }

Quat QuatExp(const Vec3& rotvec)
{
  const double angle = std::sqrt(rotvec[0] * rotvec[0] + rotvec[1] * rotvec[1] + rotvec[2] * rotvec[2]);
  if (angle < kSmallAngle)
    return Normalize(Quat{1.0, 0.5 * rotvec[0], 0.5 * rotvec[1], 0.5 * rotvec[2]});
  const double s = std::sin(0.5 * angle) / angle;
  return {std::cos(0.5 * angle), s * rotvec[0], s * rotvec[1], s * rotvec[2]};
}

double RotationAngle(const Quat& q)
{
  const double vec = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  return 2.0 * std::atan2(vec, std::abs(q.w));
}

RotMat QuatToRotMat(const Quat& q)
{
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  RotMat r;
  r.m = {1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z),       2.0 * (x * z + w * y),
         2.0 * (x * y + w * z),       1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
         2.0 * (x * z - w * y),       2.0 * (y * z + w * x),       1.0 - 2.0 * (x * x + y * y)};
  return r;
}

Quat RotMatToQuat(const RotMat& r)
{
  // Shepperd's method: branch on the largest of w^2, x^2, y^2, z^2.
  const double trace = r(0, 0) + r(1, 1) + r(2, 2);
  Quat q;
  if (trace > r(0, 0) && trace > r(1, 1) && trace > r(2, 2))
  {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q = {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s};
  }
  else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2))
  {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q = {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s};
  }
  else if (r(1, 1) >= r(2, 2))
  {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s};
  }
  else
  {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s};
  }
  if (q.w < 0.0)
    q = Negate(q);
  return Normalize(q);
}

RotMat Transpose(const RotMat& r)
{
  RotMat t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      t(i, j) = r(j, i);
  return t;
}

RotMat MatMul(const RotMat& a, const RotMat& b)
{
  RotMat c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      c(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return c;
}

Vec3 So3Log(const RotMat& r)
{
  for (double v : r.m)
    if (!std::isfinite(v))
      throw InvalidArgument("So3Log: non-finite matrix");
  const RotMat rtr = MatMul(Transpose(r), r);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > kRotationTolerance)
        throw InvalidArgument("So3Log: matrix is not orthogonal");
  if (std::abs(Determinant(r) - 1.0) > kRotationTolerance)
    throw InvalidArgument("So3Log: determinant is not +1");

  // vee(R - R^T) / 2 = sin(theta) * axis
  const Vec3 skew{0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)), 0.5 * (r(1, 0) - r(0, 1))};
  const double sin_theta = std::sqrt(skew[0] * skew[0] + skew[1] * skew[1] + skew[2] * skew[2]);
  const double cos_theta = 0.5 * (r(0, 0) + r(1, 1) + r(2, 2) - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle)
    return skew;

  if (theta < kPi - kNearPi)
  {
    const double scale = theta / sin_theta;
    return {scale * skew[0], scale * skew[1], scale * skew[2]};
  }

  // Near pi: (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) u u^T.
  const double one_minus_cos = 1.0 - cos_theta;
  std::array<double, 9> uut{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      uut[i * 3 + j] = (0.5 * (r(i, j) + r(j, i)) - (i == j ? cos_theta : 0.0)) / one_minus_cos;
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (uut[i * 3 + i] > uut[k * 3 + k])
      k = i;
  Vec3 axis{uut[0 * 3 + k], uut[1 * 3 + k], uut[2 * 3 + k]};
  const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  for (double& a : axis)
    a /= norm;
  // Orient with the antisymmetric part when it carries a sign.
  if (axis[0] * skew[0] + axis[1] * skew[1] + axis[2] * skew[2] < 0.0)
    for (double& a : axis)
      a = -a;
  return {theta * axis[0], theta * axis[1], theta * axis[2]};
}

EulerAngles QuatToEuler(const Quat& q)
{
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  EulerAngles e;
  e.roll_deg = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y)) * kDegPerRad;
  const double sin_pitch = std::clamp(2.0 * (w * y - z * x), -1.0, 1.0);
  e.pitch_deg = std::asin(sin_pitch) * kDegPerRad;
  e.yaw_deg = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)) * kDegPerRad;
  e.near_gimbal_lock = std::abs(90.0 - std::abs(e.pitch_deg)) < 1e-6;
  return e;
}

Quat QuatFromEuler(double roll_deg, double pitch_deg, double yaw_deg)
{
  const double hr = 0.5 * roll_deg * kRadPerDeg;
  const double hp = 0.5 * pitch_deg * kRadPerDeg;
  const double hy = 0.5 * yaw_deg * kRadPerDeg;
  const double cr = std::cos(hr), sr = std::sin(hr);
  const double cp = std::cos(hp), sp = std::sin(hp);
  const double cy = std::cos(hy), sy = std::sin(hy);
  return {cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy, cr * sp * cy + sr * cp * sy,
          cr * cp * sy - sr * sp * cy};
}

Quat QuatFromGravity(const Vec3& accel)
{
  const double norm = std::sqrt(accel[0] * accel[0] + accel[1] * accel[1] + accel[2] * accel[2]);
  if (!std::isfinite(norm) || std::abs(norm - kStandardGravity) > 0.2 * kStandardGravity)
    throw InvalidArgument("QuatFromGravity: accelerometer norm " + std::to_string(norm) +
                          " m/s^2 is not quasi-static");
  // At rest the accelerometer reads f = -g * R^T e_z.
  const double roll = std::atan2(-accel[1], -accel[2]);
  const double pitch = std::atan2(accel[0], std::sqrt(accel[1] * accel[1] + accel[2] * accel[2]));
  return QuatFromEuler(roll * kDegPerRad, pitch * kDegPerRad, 0.0);
}

Vec3 Rotate(const Quat& q, const Vec3& v)
{
  const RotMat r = QuatToRotMat(q);
  return {r(0, 0) * v[0] + r(0, 1) * v[1] + r(0, 2) * v[2],
          r(1, 0) * v[0] + r(1, 1) * v[1] + r(1, 2) * v[2],
          r(2, 0) * v[0] + r(2, 1) * v[1] + r(2, 2) * v[2]};
}

Vec3 GravitySpecificForce(const Quat& q)
{
  const Vec3 up_nav{0.0, 0.0, -kStandardGravity};
  return Rotate(Conjugate(q), up_nav);
}

Quat Slerp(const Quat& a, const Quat& b_in, double u)
{
  Quat b = b_in;
  double cos_omega = Dot(a, b);
  if (cos_omega < 0.0)
  {
    b = Negate(b);
    cos_omega = -cos_omega;
  }
  if (u == 0.0)
    return a;
  if (u == 1.0)
    return b;
  if (cos_omega > 1.0 - 1e-12)
  {
    const Quat lerp{a.w + u * (b.w - a.w), a.x + u * (b.x - a.x), a.y + u * (b.y - a.y),
                    a.z + u * (b.z - a.z)};
    return Normalize(lerp);
  }
  const double omega = std::acos(std::min(cos_omega, 1.0));
  const double sin_omega = std::sin(omega);
  const double ka = std::sin((1.0 - u) * omega) / sin_omega;
  const double kb = std::sin(u * omega) / sin_omega;
  return Normalize(Quat{ka * a.w + kb * b.w, ka * a.x + kb * b.x, ka * a.y + kb * b.y,
                        ka * a.z + kb * b.z});
}

} // namespace gyrocal
