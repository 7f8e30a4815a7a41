/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "generators.hpp"
#include "temp_dir.hpp"

#include "gyrocal/errors.hpp"
#include "gyrocal/metrics.hpp"
#include "gyrocal/sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace gyrocal;
using gyrocal::testing::AngleBetween;
using gyrocal::testing::AxisAngle;
using gyrocal::testing::Gen;
using gyrocal::testing::TempDir;

namespace
{

AttitudeTrack RandomTrack(Gen& gen, std::size_t n)
{
  AttitudeTrack t;
  for (std::size_t k = 0; k < n; ++k)
  {
    t.timestamps.push_back(0.01 * static_cast<double>(k));
    t.attitudes.push_back(gen.UnitQuat());
  }
  return t;
}

AttitudeTrack Offset(const AttitudeTrack& t, const std::vector<Quat>& right)
{
  AttitudeTrack out = t;
  for (std::size_t k = 0; k < t.size(); ++k)
    out.attitudes[k] = QuatMul(t.attitudes[k], right[k % right.size()]);
  return out;
}

std::vector<double> Sampled(std::size_t n, double rate, const auto& f)
{
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k)
    x[k] = f(static_cast<double>(k) / rate);
  return x;
}

} // namespace

TEST(IntegrateSequence, ZeroRateHoldsAttitude)
{
  const Quat q0 = QuatFromEuler(10, 20, 30);
  const std::vector<Vec3> w(50, Vec3{0, 0, 0});
  const std::vector<double> t = Sampled(50, 200.0, [](double s) { return s; });
  const AttitudeTrack track = IntegrateSequence(w, q0, t);
  ASSERT_EQ(track.size(), 50u);
  for (const Quat& q : track.attitudes)
  {
    EXPECT_NEAR(q.w, q0.w, 1e-15);
    EXPECT_NEAR(q.x, q0.x, 1e-15);
    EXPECT_NEAR(q.y, q0.y, 1e-15);
    EXPECT_NEAR(q.z, q0.z, 1e-15);
  }
}

TEST(IntegrateSequence, ConstantRateClosedForm)
{
  // 0.1 rad/s about x for 10 s is a 1 rad rotation.
  const std::vector<double> t = Sampled(2001, 200.0, [](double s) { return s; });
  const std::vector<Vec3> w(t.size(), Vec3{0.1, 0, 0});
  const AttitudeTrack track = IntegrateSequence(w, Quat{}, t);
  EXPECT_LT(AngleBetween(track.attitudes.back(), AxisAngle({1, 0, 0}, 1.0)) * kDegPerRad, 0.01);
}

TEST(IntegrateSequence, RecoversSimulatedTruth)
{
  MotionProfile p;
  p.kind = MotionKind::kRandomSmooth;
  TrajectoryOptions opts;
  opts.q0 = QuatFromEuler(5, -5, 100);
  const TruthTrajectory truth = GenTrajectory(12, 60.0, 200.0, p, opts);
  const AttitudeTrack est = IntegrateSequence(truth.rates, truth.attitudes.front(), truth.timestamps);
  EXPECT_LT(Aoe(est, AttitudeTrack{truth.timestamps, truth.attitudes}), 0.05);
}

TEST(IntegrateSequence, Errors)
{
  const std::vector<Vec3> w(3, Vec3{0, 0, 0});
  EXPECT_THROW(IntegrateSequence(w, Quat{}, std::vector<double>{0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(IntegrateSequence(w, Quat{}, std::vector<double>{0.0, 1.0, 1.0}), InvalidArgument);
  EXPECT_EQ(IntegrateSequence({}, Quat{}, {}).size(), 0u);
}

TEST(Aoe, Examples)
{
  Gen gen(50);
  const AttitudeTrack truth = RandomTrack(gen, 100);
  EXPECT_EQ(Aoe(truth, truth), 0.0);
  const Vec3 axis = gen.UnitVector();
  EXPECT_NEAR(Aoe(Offset(truth, {AxisAngle(axis, kRadPerDeg)}), truth), 1.0, 1e-9);
  const AttitudeTrack mixed =
      Offset(truth, {AxisAngle(axis, 3.0 * kRadPerDeg), AxisAngle(gen.UnitVector(), 4.0 * kRadPerDeg)});
  EXPECT_NEAR(Aoe(mixed, truth), std::sqrt((9.0 + 16.0) / 2.0), 1e-9);
  EXPECT_NEAR(std::sqrt((9.0 + 16.0) / 2.0), 3.54, 5e-3);
}

TEST(Aoe, NonNegativeAndZeroOnlyForEqualRotations)
{
  Gen gen(51);
  for (int i = 0; i < 100; ++i)
  {
    const AttitudeTrack a = RandomTrack(gen, 1 + gen.Index(20));
    AttitudeTrack b = a;
    for (Quat& q : b.attitudes)
      if (gen.Uniform(0, 1) < 0.5)
        q = Negate(q);
    EXPECT_LT(Aoe(b, a), 1e-6);
    b.attitudes[gen.Index(b.size())] = gen.UnitQuat();
    EXPECT_GE(Aoe(b, a), 0.0);
  }
}

TEST(Aoe, InvariantUnderCommonLeftRotation)
{
  Gen gen(52);
  for (int i = 0; i < 50; ++i)
  {
    const AttitudeTrack a = RandomTrack(gen, 30);
    const AttitudeTrack b = RandomTrack(gen, 30);
    const Quat r = gen.UnitQuat();
    AttitudeTrack ra = a, rb = b;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
      ra.attitudes[k] = QuatMul(r, a.attitudes[k]);
      rb.attitudes[k] = QuatMul(r, b.attitudes[k]);
    }
    EXPECT_NEAR(Aoe(rb, ra), Aoe(b, a), 1e-8);
  }
}

TEST(Aoe, MonotoneInDistortionMagnitude)
{
  MotionProfile p;
  p.kind = MotionKind::kRandomSmooth;
  const TruthTrajectory truth = GenTrajectory(13, 30.0, 200.0, p);
  const AttitudeTrack reference{truth.timestamps, truth.attitudes};
  for (std::uint64_t seed = 0; seed < 5; ++seed)
  {
    const DistortionGroundTruth full = SampleDistortion(seed);
    double previous = std::numeric_limits<double>::infinity();
    for (double level : {1.0, 0.5, 0.0})
    {
      DistortionGroundTruth d;
      for (int i = 0; i < 9; ++i)
        d.e[i] = (i % 4 == 0 ? 1.0 : 0.0) + level * (full.e[i] - (i % 4 == 0 ? 1.0 : 0.0));
      for (int i = 0; i < 3; ++i)
        d.b[i] = level * full.b[i];
      const GyroSequence raw = Distort(truth, d, seed);
      const double aoe = Aoe(IntegrateSequence(raw.samples, truth.attitudes.front(), raw.timestamps), reference);
      EXPECT_LE(aoe, previous) << "seed " << seed << " level " << level;
      previous = aoe;
    }
    EXPECT_LT(previous, 0.05);
  }
}

TEST(Aoe, Errors)
{
  Gen gen(53);
  const AttitudeTrack a = RandomTrack(gen, 10);
  EXPECT_THROW(Aoe(a, RandomTrack(gen, 9)), InvalidArgument);
  EXPECT_THROW(Aoe(AttitudeTrack{}, AttitudeTrack{}), InvalidArgument);
  AttitudeTrack shifted = a;
  shifted.timestamps[3] += 1e-3;
  EXPECT_THROW(Aoe(shifted, a), InvalidArgument);
}

TEST(EndpointError, Examples)
{
  const Quat q = QuatFromEuler(10, 20, 30);
  const EndpointReport same = EndpointError(q, q);
  EXPECT_EQ(same.roll_deg, 0.0);
  EXPECT_EQ(same.pitch_deg, 0.0);
  EXPECT_EQ(same.yaw_deg, 0.0);
  EXPECT_EQ(same.rmse_deg, 0.0);

  const EndpointReport r = EndpointError(QuatFromEuler(1, -2, 3), Quat{});
  EXPECT_NEAR(r.roll_deg, 1.0, 1e-9);
  EXPECT_NEAR(r.pitch_deg, -2.0, 1e-9);
  EXPECT_NEAR(r.yaw_deg, 3.0, 1e-9);
  EXPECT_NEAR(r.rmse_deg, std::sqrt(14.0 / 3.0), 1e-9);
  EXPECT_FALSE(r.near_gimbal_lock);

  // Heading differences wrap across +-180.
  const EndpointReport w = EndpointError(QuatFromEuler(0, 0, 179), QuatFromEuler(0, 0, -179));
  EXPECT_NEAR(w.yaw_deg, -2.0, 1e-9);
  EXPECT_TRUE(EndpointError(QuatFromEuler(0, 90, 0), Quat{}).near_gimbal_lock);
}

TEST(PowerSpectrum, FiveHertzPeak)
{
  const std::vector<double> x = Sampled(1000, 200.0, [](double t) { return std::sin(2 * kPi * 5 * t); });
  const Spectrum s = PowerSpectrum(x, 200.0);
  ASSERT_EQ(s.power.size(), 501u);
  EXPECT_DOUBLE_EQ(s.frequency_hz.back(), 100.0);
  const auto peak = std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
  EXPECT_DOUBLE_EQ(s.frequency_hz[peak], 5.0);
  EXPECT_NEAR(s.power[peak], 0.5, 1e-12);
}

TEST(PowerSpectrum, Parseval)
{
  Gen gen(54);
  for (std::size_t n : {64u, 65u, 1000u, 1023u})
  {
    std::vector<double> x(n);
    for (double& v : x)
      v = gen.Normal(2.0) + 3.0;
    double mean = 0.0;
    for (double v : x)
      mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x)
      var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const Spectrum s = PowerSpectrum(x, 100.0);
    double total = 0.0;
    for (double p : s.power)
      total += p;
    EXPECT_NEAR(total, var, 1e-9) << n;
  }
}

TEST(PowerSpectrum, WhiteNoiseIsFlat)
{
  std::vector<double> mean_power(257, 0.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed)
  {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(512);
    for (double& v : x)
      v = n(rng);
    const Spectrum s = PowerSpectrum(x, 200.0);
    for (std::size_t k = 0; k < s.power.size(); ++k)
      mean_power[k] += s.power[k] / 100.0;
  }
  // Interior bins only: DC is removed and the Nyquist bin is unpaired.
  std::vector<double> interior(mean_power.begin() + 1, mean_power.end() - 1);
  std::vector<double> sorted = interior;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  for (double p : interior)
    EXPECT_LT(p, 10.0 * median);
}

TEST(PowerSpectrum, ConstantSignal)
{
  const Spectrum s = PowerSpectrum(std::vector<double>(128, 0.75), 200.0);
  for (double p : s.power)
    EXPECT_LT(p, 1e-20);
  EXPECT_THROW(PowerSpectrum(std::vector<double>(63, 0.0), 200.0), InvalidArgument);
  EXPECT_THROW(PowerSpectrum(std::vector<double>(64, 0.0), 0.0), InvalidArgument);
}

TEST(DenoiseReport, Identity)
{
  Gen gen(55);
  std::vector<double> x(400);
  for (double& v : x)
    v = gen.Normal(1.0);
  const DenoiseReport r = MakeDenoiseReport(x, x, 200.0);
  EXPECT_EQ(r.high_band_power_ratio, 1.0);
  EXPECT_EQ(r.low_band_amplitude_ratio, 1.0);
  EXPECT_THROW(MakeDenoiseReport(x, std::vector<double>(399, 0.0), 200.0), InvalidArgument);
}

TEST(DenoiseReport, IdealLowPass)
{
  const auto low = [](double t) { return std::sin(2 * kPi * 2 * t); };
  const std::vector<double> before =
      Sampled(1000, 200.0, [&](double t) { return low(t) + 0.5 * std::sin(2 * kPi * 40 * t); });
  const std::vector<double> after = Sampled(1000, 200.0, low);
  const DenoiseReport r = MakeDenoiseReport(before, after, 200.0);
  EXPECT_LT(r.high_band_power_ratio, 1e-20);
  EXPECT_NEAR(r.low_band_amplitude_ratio, 1.0, 1e-12);
}

TEST(CsvWriters, Layout)
{
  TempDir dir;
  AttitudeTrack track{{0.0, 0.5}, {Quat{}, Quat{0.0, 1.0, 0.0, 0.0}}};
  WriteEulerTrackCsv(track, dir / "track.csv");
  EXPECT_EQ(gyrocal::testing::ReadText(dir / "track.csv"), "t,roll,pitch,yaw\n0,0,0,0\n0.5,180,0,0\n");

  Spectrum s{{0.0, 50.0}, {0.0, 0.25}};
  WriteSpectrumCsv(s, dir / "spectrum.csv");
  EXPECT_EQ(gyrocal::testing::ReadText(dir / "spectrum.csv"), "f_hz,power\n0,0\n50,0.25\n");

  const std::vector<std::pair<std::string, double>> m{{"aoe_deg", 1.5}, {"rmse_deg", 0.1}};
  WriteMetricCsv(m, dir / "m.csv");
  EXPECT_EQ(gyrocal::testing::ReadText(dir / "m.csv"), "metric,value\naoe_deg,1.5\nrmse_deg,0.1\n");

  EXPECT_THROW(WriteMetricCsv(m, dir / "missing" / "m.csv"), DataError);
}
