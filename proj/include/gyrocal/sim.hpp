/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Synthetic gyroscope generator with a known distortion.
//
// Truth rates are smooth functions of time. Each sensor interval
// [t_k, t_k + dt] is split into `substeps` pieces; the truth attitude is
// advanced with the exact exponential map of each piece's midpoint rate, and
// the sensor sample k is the mean of those midpoint rates. Integrating the
// samples with a first-order step therefore tracks the truth up to the
// integrator's own truncation error.

#include "gyrocal/data_io.hpp"
#include "gyrocal/quat.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gyrocal
{

inline constexpr double kDefaultNoiseSigma = 0.0015; // rad/s per sample at 200 Hz

struct DistortionGroundTruth
{
  Mat3 e{1, 0, 0, 0, 1, 0, 0, 0, 1}; // row-major
  Vec3 b{0, 0, 0};                   // rad/s
  double noise_sigma = 0.0;          // rad/s per sample

  static DistortionGroundTruth Identity() { return {}; }

  // Throws InvalidArgument unless E is finite with condition number < 100
  // and sigma is finite and non-negative.
  void Validate() const;
};

struct DistortionRanges
{
  double scale_error = 0.05;  // E_ii = 1 + U(-s, s)
  double misalign_deg = 2.0;  // E_ij = U(-sin a, sin a), i != j
  double bias = 0.02;         // B_i = U(-b, b), rad/s
  double noise_sigma = kDefaultNoiseSigma;
};

DistortionGroundTruth SampleDistortion(std::uint64_t seed, const DistortionRanges& ranges = {});

// 2-norm condition number (ratio of extreme singular values).
double ConditionNumber(const Mat3& m);
Mat3 Inverse(const Mat3& m);
Vec3 Apply(const Mat3& m, const Vec3& v);

enum class MotionKind
{
  kStatic,
  kSumOfSinusoids,
  kRandomSmooth,
};

struct Sinusoid
{
  int axis = 0;
  double amplitude = 0.0;    // rad/s
  double frequency_hz = 0.0;
  double phase = 0.0;        // rad
};

struct MotionProfile
{
  MotionKind kind = MotionKind::kStatic;
  // kSumOfSinusoids: used as given when non-empty, otherwise three seeded
  // components per axis with frequencies in [0.1, 2] Hz whose amplitudes sum
  // to at most max_rate.
  std::vector<Sinusoid> components;
  double max_rate = 2.0;   // rad/s, per axis
  double cutoff_hz = 2.0;  // kRandomSmooth band limit
  double rms_rate = 1.0;   // kRandomSmooth per-axis RMS before peak limiting
};

// "static", "sinusoids" or "random-smooth"; throws InvalidArgument otherwise.
MotionKind ParseMotionKind(const std::string& name);
std::string MotionKindName(MotionKind kind);

struct TruthTrajectory
{
  std::vector<double> timestamps;   // s
  std::vector<Vec3> rates;          // rad/s, interval means over [t_k, t_k + dt]
  std::vector<Quat> attitudes;      // truth at each timestamp
  Quat final_attitude;              // truth at t_last + dt

  std::size_t size() const noexcept { return timestamps.size(); }
};

struct TrajectoryOptions
{
  Quat q0;
  double t0 = 0.0;
  std::size_t substeps = 10;
};

// round(duration * rate) samples at t0 + k / rate.
TruthTrajectory GenTrajectory(std::uint64_t seed, double duration_s, double rate_hz,
                              const MotionProfile& profile, const TrajectoryOptions& options = {});

// raw = E^-1 (omega - B) + N(0, sigma^2) per axis and sample; accelerometer
// columns carry the specific force of gravity at the truth attitude.
GyroSequence Distort(const TruthTrajectory& truth, const DistortionGroundTruth& d, std::uint64_t seed,
                     bool with_accel = true);

struct TurntableOptions
{
  double rate_hz = 200.0;
  double static_s = 1.0;
  double motion_s = 3.0;
  MotionKind motion = MotionKind::kRandomSmooth; // shape of the rotation phase
  double max_rate = 2.0;
  std::size_t substeps = 10;
  bool with_accel = true;
};

struct TurntableSegment
{
  GyroSequence log;        // raw samples with references at the static midpoints
  TruthTrajectory truth;
};

struct TurntableSession
{
  DistortionGroundTruth distortion;
  std::vector<TurntableSegment> segments;
};

// Each segment is static, rotation under a sin^2 envelope, static. The attitude carries over from one segment to the next; the
// first segment starts at a seeded tilted attitude.
TurntableSession GenTurntableSession(std::uint64_t seed, const DistortionGroundTruth& d,
                                     std::size_t segment_count, const TurntableOptions& options = {});

// One loss segment per session segment, spanning its two references.
SegmentDataset SessionDataset(const TurntableSession& session, std::size_t n);

} // namespace gyrocal
