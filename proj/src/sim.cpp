/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/sim.hpp"

#include "gyrocal/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace gyrocal
{
namespace
{
using RateFn = std::function<Vec3(double)>;

constexpr std::size_t kRandomSmoothComponents = 24;
constexpr double kRandomSmoothMinHz = 0.05;

// Independent, reproducible stream for (seed, purpose, index).
std::mt19937_64 MakeRng(std::uint64_t seed, std::uint32_t purpose, std::uint32_t index = 0)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose,
                    index};
  return std::mt19937_64(seq);
}

double Uniform(std::mt19937_64& rng, double lo, double hi)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Matrix3d ToEigen(const Mat3& m)
{
  Eigen::Matrix3d out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      out(r, c) = m[3 * r + c];
  return out;
}

double SinusoidSum(const std::vector<Sinusoid>& components, int axis, double t)
{
  double v = 0.0;
  for (const Sinusoid& s : components)
    if (s.axis == axis)
      v += s.amplitude * std::sin(2.0 * kPi * s.frequency_hz * t + s.phase);
  return v;
}

std::vector<Sinusoid> RandomSinusoids(std::mt19937_64& rng, double max_rate)
{
  std::vector<Sinusoid> out;
  for (int axis = 0; axis < 3; ++axis)
  {
    const double total = max_rate * Uniform(rng, 0.5, 1.0);
    double weights[3];
    double weight_sum = 0.0;
    for (double& w : weights)
      weight_sum += (w = Uniform(rng, 0.2, 1.0));
    for (double w : weights)
      out.push_back({axis, total * w / weight_sum, Uniform(rng, 0.1, 2.0), Uniform(rng, 0.0, 2.0 * kPi)});
  }
  return out;
}

// Band-limited random rates: many random-phase tones below the cutoff,
// scaled to the requested RMS and then limited to max_rate over [t0, t0 + duration].
std::vector<Sinusoid> RandomSmooth(std::mt19937_64& rng, const MotionProfile& profile, double t0,
                                   double duration, const std::function<double(double)>& envelope)
{
  std::vector<Sinusoid> out;
  for (int axis = 0; axis < 3; ++axis)
  {
    std::vector<Sinusoid> axis_components;
    double power = 0.0;
    for (std::size_t i = 0; i < kRandomSmoothComponents; ++i)
    {
      const double amplitude = Uniform(rng, 0.0, 1.0);
      power += 0.5 * amplitude * amplitude;
      axis_components.push_back({axis, amplitude, Uniform(rng, kRandomSmoothMinHz, profile.cutoff_hz),
                                 Uniform(rng, 0.0, 2.0 * kPi)});
    }
    double scale = power > 0.0 ? profile.rms_rate / std::sqrt(power) : 0.0;
    double peak = 0.0;
    const std::size_t probes = std::max<std::size_t>(1000, static_cast<std::size_t>(duration * 1000.0));
    for (std::size_t k = 0; k <= probes; ++k)
    {
      const double t = t0 + duration * static_cast<double>(k) / static_cast<double>(probes);
      peak = std::max(peak, std::abs(scale * envelope(t) * SinusoidSum(axis_components, axis, t)));
    }
    if (peak > profile.max_rate)
      scale *= profile.max_rate / peak;
    for (Sinusoid& s : axis_components)
    {
      s.amplitude *= scale;
      out.push_back(s);
    }
  }
  return out;
}

TruthTrajectory IntegrateTruth(const RateFn& rate, double t0, std::size_t count, double rate_hz,
                               std::size_t substeps, const Quat& q0)
{
  if (substeps == 0)
    throw InvalidArgument("substeps must be at least 1");
  TruthTrajectory out;
  out.timestamps.reserve(count);
  out.rates.reserve(count);
  out.attitudes.reserve(count);
  const double h = 1.0 / (rate_hz * static_cast<double>(substeps));
  Quat q = Normalize(q0);
  const double start_sample = std::round(t0 * rate_hz);
  const bool on_grid = std::abs(start_sample - t0 * rate_hz) < 1e-9;
  for (std::size_t k = 0; k < count; ++k)
  {
    // Timestamps on the global grid so consecutive segments share a clock.
    const double t = on_grid ? (start_sample + static_cast<double>(k)) / rate_hz
                             : t0 + static_cast<double>(k) / rate_hz;
    out.timestamps.push_back(t);
    out.attitudes.push_back(q);
    Vec3 mean{0, 0, 0};
    for (std::size_t s = 0; s < substeps; ++s)
    {
      const double tm = t + (static_cast<double>(s) + 0.5) * h;
      const Vec3 w = rate(tm);
      for (int a = 0; a < 3; ++a)
        mean[a] += w[a];
      q = Normalize(QuatMul(q, QuatExp({w[0] * h, w[1] * h, w[2] * h})));
    }
    for (double& v : mean)
      v /= static_cast<double>(substeps);
    out.rates.push_back(mean);
  }
  out.final_attitude = q;
  return out;
}

void CheckRate(double rate_hz)
{
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz))
    throw InvalidArgument("sample rate must be positive, got " + std::to_string(rate_hz));
}
} // namespace

void DistortionGroundTruth::Validate() const
{
  for (double v : e)
    if (!std::isfinite(v))
      throw InvalidArgument("distortion matrix has a non-finite element");
  for (double v : b)
    if (!std::isfinite(v))
      throw InvalidArgument("distortion bias has a non-finite element");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
    throw InvalidArgument("noise sigma must be finite and non-negative");
  const double cond = ConditionNumber(e);
  if (!(cond < 100.0))
    throw InvalidArgument("distortion matrix is singular or ill-conditioned (condition number " +
                          std::to_string(cond) + ")");
}

DistortionGroundTruth SampleDistortion(std::uint64_t seed, const DistortionRanges& ranges)
{
  auto rng = MakeRng(seed, 1);
  DistortionGroundTruth d;
  const double off = std::sin(ranges.misalign_deg * kRadPerDeg);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      d.e[3 * r + c] = r == c ? 1.0 + Uniform(rng, -ranges.scale_error, ranges.scale_error)
                              : Uniform(rng, -off, off);
  for (double& v : d.b)
    v = Uniform(rng, -ranges.bias, ranges.bias);
  d.noise_sigma = ranges.noise_sigma;
  d.Validate();
  return d;
}

double ConditionNumber(const Mat3& m)
{
  const Eigen::Vector3d s = Eigen::JacobiSVD<Eigen::Matrix3d>(ToEigen(m)).singularValues();
  const double smallest = s.minCoeff();
  if (smallest == 0.0)
    return std::numeric_limits<double>::infinity();
  return s.maxCoeff() / smallest;
}

Mat3 Inverse(const Mat3& m)
{
  if (!(ConditionNumber(m) < 1e12))
    throw InvalidArgument("matrix is singular");
  const Eigen::Matrix3d inv = ToEigen(m).inverse();
  Mat3 out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      out[3 * r + c] = inv(r, c);
  return out;
}

Vec3 Apply(const Mat3& m, const Vec3& v)
{
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

MotionKind ParseMotionKind(const std::string& name)
{
  if (name == "static")
    return MotionKind::kStatic;
  if (name == "sinusoids" || name == "sum-of-sinusoids")
    return MotionKind::kSumOfSinusoids;
  if (name == "random-smooth")
    return MotionKind::kRandomSmooth;
  throw InvalidArgument("unknown motion profile '" + name + "' (static, sinusoids, random-smooth)");
}

std::string MotionKindName(MotionKind kind)
{
  switch (kind)
  {
  case MotionKind::kStatic:
    return "static";
  case MotionKind::kSumOfSinusoids:
    return "sinusoids";
  case MotionKind::kRandomSmooth:
    return "random-smooth";
  }
  return "unknown";
}

TruthTrajectory GenTrajectory(std::uint64_t seed, double duration_s, double rate_hz,
                              const MotionProfile& profile, const TrajectoryOptions& options)
{
  CheckRate(rate_hz);
  if (!(duration_s > 0.0))
    throw InvalidArgument("duration must be positive");
  const auto count = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  auto rng = MakeRng(seed, 2);

  std::vector<Sinusoid> components;
  switch (profile.kind)
  {
  case MotionKind::kStatic:
    break;
  case MotionKind::kSumOfSinusoids:
    components = profile.components.empty() ? RandomSinusoids(rng, profile.max_rate) : profile.components;
    break;
  case MotionKind::kRandomSmooth:
    components = RandomSmooth(rng, profile, options.t0, duration_s, [](double) { return 1.0; });
    break;
  }
  const RateFn rate = [&components](double t) {
    return Vec3{SinusoidSum(components, 0, t), SinusoidSum(components, 1, t), SinusoidSum(components, 2, t)};
  };
  return IntegrateTruth(rate, options.t0, count, rate_hz, options.substeps, options.q0);
}

GyroSequence Distort(const TruthTrajectory& truth, const DistortionGroundTruth& d, std::uint64_t seed,
                     bool with_accel)
{
  d.Validate();
  const Mat3 e_inv = Inverse(d.e);
  auto rng = MakeRng(seed, 3);
  std::normal_distribution<double> noise(0.0, 1.0);

  GyroSequence seq;
  seq.timestamps = truth.timestamps;
  seq.samples.reserve(truth.size());
  for (const Vec3& w : truth.rates)
  {
    Vec3 raw = Apply(e_inv, {w[0] - d.b[0], w[1] - d.b[1], w[2] - d.b[2]});
    if (d.noise_sigma > 0.0)
      for (double& v : raw)
        v += d.noise_sigma * noise(rng);
    seq.samples.push_back(raw);
  }
  if (with_accel)
  {
    seq.accel.reserve(truth.size());
    for (const Quat& q : truth.attitudes)
      seq.accel.push_back(GravitySpecificForce(q));
  }
  return seq;
}

TurntableSession GenTurntableSession(std::uint64_t seed, const DistortionGroundTruth& d,
                                     std::size_t segment_count, const TurntableOptions& options)
{
  CheckRate(options.rate_hz);
  if (segment_count == 0)
    throw InvalidArgument("segment count must be at least 1");
  if (!(options.static_s > 0.0) || !(options.motion_s > 0.0))
    throw InvalidArgument("static and motion durations must be positive");
  d.Validate();

  const auto n_static = static_cast<std::size_t>(std::llround(options.static_s * options.rate_hz));
  const auto n_motion = static_cast<std::size_t>(std::llround(options.motion_s * options.rate_hz));
  const std::size_t n = 2 * n_static + n_motion;
  const std::size_t ref_first = n_static / 2;
  const std::size_t ref_last = n - n_static + n_static / 2;
  const double motion_start = options.static_s;
  const double motion_end = options.static_s + options.motion_s;

  auto start_rng = MakeRng(seed, 4);
  Quat q = QuatFromEuler(Uniform(start_rng, -15.0, 15.0), Uniform(start_rng, -15.0, 15.0),
                         Uniform(start_rng, -180.0, 180.0));

  TurntableSession session;
  session.distortion = d;
  for (std::size_t j = 0; j < segment_count; ++j)
  {
    const double t0 = static_cast<double>(j * n) / options.rate_hz;
    const auto envelope = [&](double t) {
      const double local = t - t0;
      if (local <= motion_start || local >= motion_end)
        return 0.0;
      const double s = std::sin(kPi * (local - motion_start) / options.motion_s);
      return s * s;
    };
    auto rng = MakeRng(seed, 5, static_cast<std::uint32_t>(j));
    MotionProfile profile;
    profile.kind = options.motion;
    profile.max_rate = options.max_rate;
    std::vector<Sinusoid> components;
    if (options.motion == MotionKind::kRandomSmooth)
      components = RandomSmooth(rng, profile, t0 + motion_start, options.motion_s, envelope);
    else if (options.motion == MotionKind::kSumOfSinusoids)
      components = RandomSinusoids(rng, options.max_rate);
    const RateFn rate = [&](double t) {
      const double g = envelope(t);
      if (g == 0.0)
        return Vec3{0, 0, 0};
      return Vec3{g * SinusoidSum(components, 0, t), g * SinusoidSum(components, 1, t),
                  g * SinusoidSum(components, 2, t)};
    };

    TurntableSegment segment;
    segment.truth = IntegrateTruth(rate, t0, n, options.rate_hz, options.substeps, q);
    q = segment.truth.final_attitude;
    segment.log = Distort(segment.truth, d, seed ^ (0x9e3779b97f4a7c15ULL * (j + 1)), options.with_accel);
    for (std::size_t k : {ref_first, ref_last})
      segment.log.references.push_back({segment.truth.timestamps[k], segment.truth.attitudes[k], true});
    session.segments.push_back(std::move(segment));
  }
  return session;
}

SegmentDataset SessionDataset(const TurntableSession& session, std::size_t n)
{
  SegmentDataset out;
  for (const TurntableSegment& segment : session.segments)
    out.Append(SegmentByReferences(segment.log, n).dataset);
  return out;
}

} // namespace gyrocal
