/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Attitude-accuracy metrics and denoising diagnostics.

#include "gyrocal/quat.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gyrocal
{

struct AttitudeTrack
{
  std::vector<double> timestamps;
  std::vector<Quat> attitudes;

  std::size_t size() const noexcept { return timestamps.size(); }
  void Validate() const;
};

// attitudes[0] = q0; attitudes[k + 1] = IntegrateStep(attitudes[k], omega[k], t[k + 1] - t[k]).
AttitudeTrack IntegrateSequence(std::span<const Vec3> omega, const Quat& q0,
                                std::span<const double> timestamps);

// Absolute orientation error in degrees: sqrt(mean ||log(R_n^T Rhat_n)||^2).
// Timestamps must agree within time_tolerance_s.
double Aoe(const AttitudeTrack& estimate, const AttitudeTrack& truth, double time_tolerance_s = 1e-6);

struct EndpointReport
{
  double roll_deg = 0.0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  double rmse_deg = 0.0;
  bool near_gimbal_lock = false;
};

// Z-Y-X Euler differences (estimate minus reference, wrapped to
// (-180, 180]) and their root mean square.
EndpointReport EndpointError(const Quat& estimate, const Quat& reference);

struct Spectrum
{
  std::vector<double> frequency_hz;
  std::vector<double> power; // one-sided; sums to the signal variance
};

inline constexpr std::size_t kMinSpectrumLength = 64;

// Periodogram of the mean-removed signal with a rectangular taper.
Spectrum PowerSpectrum(std::span<const double> signal, double rate_hz);

struct DenoiseReportConfig
{
  double high_cutoff_hz = 20.0;
  double low_cutoff_hz = 5.0;
};

struct DenoiseReport
{
  Spectrum before;
  Spectrum after;
  double high_band_power_ratio = 1.0;     // power above the high cutoff, after / before
  double low_band_amplitude_ratio = 1.0;  // sqrt of power in (0, low cutoff], after / before
};

DenoiseReport MakeDenoiseReport(std::span<const double> before, std::span<const double> after,
                                double rate_hz, const DenoiseReportConfig& config = {});

void WriteEulerTrackCsv(const AttitudeTrack& track, const std::filesystem::path& path);
void WriteSpectrumCsv(const Spectrum& spectrum, const std::filesystem::path& path);
void WriteMetricCsv(std::span<const std::pair<std::string, double>> metrics,
                    const std::filesystem::path& path);

} // namespace gyrocal
