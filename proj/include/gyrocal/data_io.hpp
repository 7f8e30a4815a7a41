/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Gyroscope recordings, reference attitudes and loss segments.
//
// File formats
//
//   EuRoC (directory containing mav0/, or mav0/ itself):
//     imu0/data.csv                        timestamp [ns], wx, wy, wz [rad/s], ax, ay, az [m/s^2]
//     state_groundtruth_estimate0/data.csv timestamp [ns], px, py, pz, qw, qx, qy, qz, ...
//   '#'-prefixed header lines are skipped.
//
//   Turntable log (one CSV file):
//     t_s,gx,gy,gz[,ax,ay,az][,ref_qw,ref_qx,ref_qy,ref_qz]
//   Reference columns are filled only on rows that carry a reference
//   attitude and left empty elsewhere. UTF-8, LF or CRLF.

#include "gyrocal/errors.hpp"
#include "gyrocal/quat.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gyrocal
{

struct AttitudeReference
{
  double t = 0.0;
  Quat q;
  // False for gravity-derived references, whose heading is not measured.
  bool yaw_observable = true;
};

struct GyroSequence
{
  // Seconds, strictly increasing, relative to time_origin_s.
  std::vector<double> timestamps;
  std::vector<Vec3> samples;
  // Empty, or one specific-force sample per timestamp.
  std::vector<Vec3> accel;
  // Sorted by time.
  std::vector<AttitudeReference> references;
  // Absolute time of t = 0. EuRoC keeps nanosecond precision this way.
  double time_origin_s = 0.0;
  std::int64_t time_origin_ns = 0;

  std::size_t size() const noexcept { return samples.size(); }

  // Throws DataError when an invariant does not hold.
  void Validate() const;
};

struct Segment
{
  std::vector<double> timestamps;
  std::vector<Vec3> raw;
  // In-segment index at which q_start holds; integration runs from here to
  // the last sample.
  std::size_t start_index = 0;
  Quat q_start;
  Quat q_end;
  bool end_yaw_observable = true;

  std::size_t size() const noexcept { return raw.size(); }
};

struct SegmentDataset
{
  std::vector<Segment> segments;

  std::size_t size() const noexcept { return segments.size(); }
  bool empty() const noexcept { return segments.empty(); }
  void Append(SegmentDataset other);
};

struct SegmentationResult
{
  SegmentDataset dataset;
  std::vector<std::string> warnings;
};

// Tolerance for ground-truth quaternion norms; within it rows are renormalised.
inline constexpr double kReferenceNormTolerance = 1e-3;

GyroSequence LoadEuroc(const std::filesystem::path& directory);

// Ground-truth track of a EuRoC directory as a dense sequence of references.
std::vector<AttitudeReference> LoadEurocGroundTruth(const std::filesystem::path& directory,
                                                    std::int64_t time_origin_ns);

struct TurntableLoadOptions
{
  // When the log has no reference columns but has accelerometer columns,
  // synthesize references from gravity at the midpoints of the leading and
  // trailing static windows. The trailing reference is marked yaw-unobservable.
  bool references_from_gravity = false;
  double static_window_s = 1.0;
};

GyroSequence LoadTurntableLog(const std::filesystem::path& path,
                              const TurntableLoadOptions& options = {});

// Writes the turntable schema; numbers use the shortest representation that
// round-trips, so reloading reproduces every column bit-exactly.
void WriteTurntableLog(const GyroSequence& seq, const std::filesystem::path& path);
std::string FormatDouble(double v);

// Attitude track CSV: t,qw,qx,qy,qz.
void WriteAttitudeTrack(std::span<const double> t, std::span<const Quat> q,
                        const std::filesystem::path& path);
std::vector<AttitudeReference> LoadAttitudeTrack(const std::filesystem::path& path);

// Slerp between the bracketing references; exact at reference timestamps.
// Throws DataError for targets outside the reference span.
Quat AlignReference(std::span<const AttitudeReference> references, double t);
std::vector<Quat> AlignReference(const GyroSequence& seq, std::span<const double> targets);

// Non-overlapping windows of length m. Segment j uses the aligned reference
// at in-segment index n - 1 as q_start and at index m - 1 as q_end. Windows
// without reference coverage and the trailing remainder are dropped with a
// warning.
SegmentationResult SegmentSequence(const GyroSequence& seq, std::size_t m, std::size_t n);

// One segment per consecutive pair of references: the segment runs from
// n - 1 samples before the first reference's sample to the second
// reference's sample, so q_start sits at in-segment index n - 1 and q_end at
// the last sample. References must fall within half a sample period of a
// sample timestamp.
SegmentationResult SegmentByReferences(const GyroSequence& seq, std::size_t n);

} // namespace gyrocal
