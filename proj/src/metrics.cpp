/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/metrics.hpp"

#include "gyrocal/data_io.hpp"
#include "gyrocal/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>

namespace gyrocal
{
namespace
{
double WrapDegrees(double d)
{
  d = std::fmod(d, 360.0);
  if (d > 180.0)
    d -= 360.0;
  else if (d <= -180.0)
    d += 360.0;
  return d;
}

double BandPower(const Spectrum& s, double lo_exclusive, double hi_inclusive)
{
  double sum = 0.0;
  for (std::size_t k = 0; k < s.power.size(); ++k)
    if (s.frequency_hz[k] > lo_exclusive && s.frequency_hz[k] <= hi_inclusive)
      sum += s.power[k];
  return sum;
}

double Ratio(double after, double before)
{
  if (before == 0.0)
    return after == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return after / before;
}

std::ofstream OpenCsv(const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw DataError("cannot write " + path.string());
  return out;
}
} // namespace

void AttitudeTrack::Validate() const
{
  if (timestamps.size() != attitudes.size())
    throw InvalidArgument("attitude track has " + std::to_string(timestamps.size()) + " timestamps but " +
                          std::to_string(attitudes.size()) + " attitudes");
  for (std::size_t k = 1; k < timestamps.size(); ++k)
    if (!(timestamps[k] > timestamps[k - 1]))
      throw InvalidArgument("attitude track timestamps are not strictly increasing at index " +
                            std::to_string(k));
}

AttitudeTrack IntegrateSequence(std::span<const Vec3> omega, const Quat& q0,
                                std::span<const double> timestamps)
{
  if (omega.size() != timestamps.size())
    throw InvalidArgument("IntegrateSequence: " + std::to_string(omega.size()) + " rates but " +
                          std::to_string(timestamps.size()) + " timestamps");
  AttitudeTrack track;
  if (timestamps.empty())
    return track;
  track.timestamps.assign(timestamps.begin(), timestamps.end());
  track.attitudes.reserve(timestamps.size());
  Quat q = Normalize(q0);
  track.attitudes.push_back(q);
  for (std::size_t k = 0; k + 1 < timestamps.size(); ++k)
  {
    const double dt = timestamps[k + 1] - timestamps[k];
    if (!(dt > 0.0))
      throw InvalidArgument("IntegrateSequence: timestamps are not strictly increasing at index " +
                            std::to_string(k + 1));
    q = IntegrateStep(q, omega[k], dt);
    track.attitudes.push_back(q);
  }
  return track;
}

double Aoe(const AttitudeTrack& estimate, const AttitudeTrack& truth, double time_tolerance_s)
{
  if (estimate.size() != truth.size())
    throw InvalidArgument("AOE: estimate has " + std::to_string(estimate.size()) + " samples, truth has " +
                          std::to_string(truth.size()));
  if (truth.size() == 0)
    throw InvalidArgument("AOE: tracks are empty");
  estimate.Validate();
  truth.Validate();
  double sum = 0.0;
  for (std::size_t n = 0; n < truth.size(); ++n)
  {
    if (std::abs(estimate.timestamps[n] - truth.timestamps[n]) > time_tolerance_s)
      throw InvalidArgument("AOE: tracks are not time-aligned at index " + std::to_string(n));
    const RotMat rel = MatMul(Transpose(QuatToRotMat(truth.attitudes[n])), QuatToRotMat(estimate.attitudes[n]));
    const Vec3 v = So3Log(rel);
    sum += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  }
  return std::sqrt(sum / static_cast<double>(truth.size())) * kDegPerRad;
}

EndpointReport EndpointError(const Quat& estimate, const Quat& reference)
{
  const EulerAngles e = QuatToEuler(estimate);
  const EulerAngles r = QuatToEuler(reference);
  EndpointReport out;
  out.roll_deg = WrapDegrees(e.roll_deg - r.roll_deg);
  out.pitch_deg = WrapDegrees(e.pitch_deg - r.pitch_deg);
  out.yaw_deg = WrapDegrees(e.yaw_deg - r.yaw_deg);
  out.rmse_deg = std::sqrt(
      (out.roll_deg * out.roll_deg + out.pitch_deg * out.pitch_deg + out.yaw_deg * out.yaw_deg) / 3.0);
  out.near_gimbal_lock = e.near_gimbal_lock || r.near_gimbal_lock;
  return out;
}

Spectrum PowerSpectrum(std::span<const double> signal, double rate_hz)
{
  const std::size_t n = signal.size();
  if (n < kMinSpectrumLength)
    throw InvalidArgument("power spectrum needs at least " + std::to_string(kMinSpectrumLength) +
                          " samples, got " + std::to_string(n));
  if (!(rate_hz > 0.0))
    throw InvalidArgument("power spectrum: sample rate must be positive");

  double mean = 0.0;
  for (double v : signal)
    mean += v;
  mean /= static_cast<double>(n);

  const std::size_t bins = n / 2 + 1;
  std::vector<double> input(n);
  for (std::size_t k = 0; k < n; ++k)
    input[k] = signal[k] - mean;
  std::unique_ptr<fftw_complex[], decltype(&fftw_free)> output(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)), &fftw_free);
  // The FFTW planner is not thread-safe.
  static std::mutex planner_mutex;
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), input.data(), output.get(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }

  Spectrum s;
  s.frequency_hz.resize(bins);
  s.power.resize(bins);
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 0; k < bins; ++k)
  {
    const double re = output[k][0];
    const double im = output[k][1];
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    s.frequency_hz[k] = static_cast<double>(k) * rate_hz / static_cast<double>(n);
    s.power[k] = (unpaired ? 1.0 : 2.0) * (re * re + im * im) * norm;
  }
  return s;
}

DenoiseReport MakeDenoiseReport(std::span<const double> before, std::span<const double> after,
                                double rate_hz, const DenoiseReportConfig& config)
{
  if (before.size() != after.size())
    throw InvalidArgument("denoise report: before has " + std::to_string(before.size()) +
                          " samples, after has " + std::to_string(after.size()));
  DenoiseReport r;
  r.before = PowerSpectrum(before, rate_hz);
  r.after = PowerSpectrum(after, rate_hz);
  const double inf = std::numeric_limits<double>::infinity();
  r.high_band_power_ratio =
      Ratio(BandPower(r.after, config.high_cutoff_hz, inf), BandPower(r.before, config.high_cutoff_hz, inf));
  r.low_band_amplitude_ratio =
      std::sqrt(Ratio(BandPower(r.after, 0.0, config.low_cutoff_hz), BandPower(r.before, 0.0, config.low_cutoff_hz)));
  return r;
}

void WriteEulerTrackCsv(const AttitudeTrack& track, const std::filesystem::path& path)
{
  track.Validate();
  std::ofstream out = OpenCsv(path);
  out << "t,roll,pitch,yaw\n";
  for (std::size_t k = 0; k < track.size(); ++k)
  {
    const EulerAngles e = QuatToEuler(track.attitudes[k]);
    out << FormatDouble(track.timestamps[k]) << ',' << FormatDouble(e.roll_deg) << ','
        << FormatDouble(e.pitch_deg) << ',' << FormatDouble(e.yaw_deg) << '\n';
  }
}

void WriteSpectrumCsv(const Spectrum& spectrum, const std::filesystem::path& path)
{
  std::ofstream out = OpenCsv(path);
  out << "f_hz,power\n";
  for (std::size_t k = 0; k < spectrum.power.size(); ++k)
    out << FormatDouble(spectrum.frequency_hz[k]) << ',' << FormatDouble(spectrum.power[k]) << '\n';
}

void WriteMetricCsv(std::span<const std::pair<std::string, double>> metrics,
                    const std::filesystem::path& path)
{
  std::ofstream out = OpenCsv(path);
  out << "metric,value\n";
  for (const auto& [name, value] : metrics)
    out << name << ',' << FormatDouble(value) << '\n';
}

} // namespace gyrocal
