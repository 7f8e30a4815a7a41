/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "generators.hpp"
#include "kinks.hpp"

#include "gyrocal/adamw.hpp"
#include "gyrocal/errors.hpp"
#include "gyrocal/sim.hpp"
#include "gyrocal/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace gyrocal;
using gyrocal::testing::AxisAngle;
using gyrocal::testing::ActivationSigns;
using gyrocal::testing::Gen;

namespace
{

constexpr double kDt = 0.005;

Segment MakeSegment(const std::vector<Vec3>& raw, std::size_t start, const Quat& q_start, const Quat& q_end)
{
  Segment s;
  s.raw = raw;
  for (std::size_t k = 0; k < raw.size(); ++k)
    s.timestamps.push_back(kDt * static_cast<double>(k));
  s.start_index = start;
  s.q_start = q_start;
  s.q_end = q_end;
  return s;
}

// q_end produced by the library integrator itself, so the identity network
// reaches it exactly.
Segment SelfConsistentSegment(Gen& gen, std::size_t m, std::size_t start)
{
  std::vector<Vec3> raw(m);
  for (Vec3& v : raw)
    v = gen.Vector(-1, 1);
  const Quat q0 = gen.UnitQuat();
  Quat q = q0;
  Segment s = MakeSegment(raw, start, q0, q0);
  for (std::size_t k = start; k + 1 < m; ++k)
    q = IntegrateStep(q, raw[k], s.timestamps[k + 1] - s.timestamps[k]);
  s.q_end = q;
  return s;
}

SegmentDataset RandomDataset(Gen& gen, std::size_t count, std::size_t m, std::size_t start)
{
  SegmentDataset d;
  for (std::size_t j = 0; j < count; ++j)
  {
    Segment s = SelfConsistentSegment(gen, m, start);
    s.q_end = QuatMul(s.q_end, QuatExp(gen.Vector(-0.05, 0.05)));
    d.segments.push_back(std::move(s));
  }
  return d;
}

template<typename F>
double CentralDifference(std::vector<double> x, std::size_t i, double h, F&& f)
{
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// True if no activation changes sign on [x_i - h, x_i + h] (endpoints checked).
template<typename F>
bool SmoothAround(std::vector<double> x, std::size_t i, double h, F&& signs)
{
  const auto here = signs(x);
  const double x0 = x[i];
  x[i] = x0 + h;
  const bool up = signs(x) == here;
  x[i] = x0 - h;
  return up && signs(x) == here;
}

} // namespace

TEST(AdamW, FirstStepIsLearningRate)
{
  AdamW opt(1, AdamWConfig{});
  std::vector<double> theta{0.0};
  opt.Step(theta, std::vector<double>{1.0});
  EXPECT_NEAR(theta[0], -0.01 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(AdamW, MatchesReferenceRecursion)
{
  Gen gen(81);
  const AdamWConfig cfg{.learning_rate = 0.003, .weight_decay = 0.01};
  AdamW opt(3, cfg);
  std::vector<double> theta{0.5, -0.2, 1.0}, ref = theta, m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 50; ++t)
  {
    const std::vector<double> g{gen.Normal(1), gen.Normal(1), gen.Normal(1)};
    opt.Step(theta, g);
    for (int i = 0; i < 3; ++i)
    {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      ref[i] -= 0.003 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * ref[i]);
    }
  }
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(theta[i], ref[i], 1e-14);
}

TEST(AdamW, ZeroGradientFixedPointAndDecay)
{
  AdamW plain(2, AdamWConfig{});
  std::vector<double> a{0.3, -0.7};
  for (int i = 0; i < 100; ++i)
    plain.Step(a, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(a[0], 0.3);
  EXPECT_EQ(a[1], -0.7);

  AdamW decay(1, AdamWConfig{.learning_rate = 0.01, .weight_decay = 0.1});
  std::vector<double> b{2.0};
  double expected = 2.0;
  for (int i = 0; i < 100; ++i)
  {
    decay.Step(b, std::vector<double>{0.0});
    expected *= 1.0 - 0.01 * 0.1;
  }
  EXPECT_NEAR(b[0], expected, 1e-12);
}

TEST(AdamW, NonFiniteGradientNamesParameter)
{
  AdamW opt(27, AdamWConfig{}, CalibParamName);
  std::vector<double> theta(27, 0.0), g(27, 0.0);
  g[10] = std::numeric_limits<double>::quiet_NaN();
  try
  {
    opt.Step(theta, g);
    FAIL() << "step accepted NaN";
  }
  catch (const NumericError& e)
  {
    EXPECT_NE(std::string(e.what()).find(CalibParamName(10)), std::string::npos) << e.what();
  }
  EXPECT_EQ(opt.step_count(), 0u);
  EXPECT_EQ(theta, std::vector<double>(27, 0.0));
  EXPECT_THROW(opt.Step(theta, std::vector<double>(3, 0.0)), InvalidArgument);
}

TEST(SegmentLoss, PerfectCalibrationIsNearZero)
{
  // Rotation about a fixed axis with a slowly varying rate: exact attitude in closed form.
  const Vec3 axis = Gen(82).UnitVector();
  std::vector<Vec3> raw(400);
  double angle = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k)
  {
    const double rate = 0.2 * std::sin(0.01 * static_cast<double>(k));
    raw[k] = {rate * axis[0], rate * axis[1], rate * axis[2]};
    if (k + 1 < raw.size())
      angle += rate * kDt;
  }
  const Quat q0 = QuatFromEuler(10, -20, 30);
  const Segment s = MakeSegment(raw, 0, q0, QuatMul(q0, AxisAngle(axis, angle)));
  const double loss = SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s);
  EXPECT_LT(loss, 1e-6);

  Segment flipped = s;
  flipped.q_end = Negate(s.q_end);
  EXPECT_EQ(SegmentLoss(CalibNetParams::Identity(), nullptr, 1, flipped), loss);
}

TEST(SegmentLoss, NegatedReferenceGivesSameLoss)
{
  Gen gen(83);
  for (int i = 0; i < 50; ++i)
  {
    Segment s = SelfConsistentSegment(gen, 60, gen.Index(20));
    s.q_end = gen.UnitQuat();
    const CalibNetParams p = gen.Calib(0.2);
    const double a = SegmentLoss(p, nullptr, 1, s);
    s.q_end = Negate(s.q_end);
    EXPECT_EQ(SegmentLoss(p, nullptr, 1, s), a);
    s.q_start = Negate(s.q_start);
    EXPECT_NEAR(SegmentLoss(p, nullptr, 1, s), a, 1e-15);
  }
}

TEST(SegmentLoss, ConstantBiasDrift)
{
  // Static truth, raw = B = (0.01, 0, 0) for 2 s at 200 Hz: 400 steps about x.
  const std::vector<Vec3> raw(401, Vec3{0.01, 0.0, 0.0});
  const Segment s = MakeSegment(raw, 0, Quat{}, Quat{});
  const double loss = SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s);

  // Each normalised first-order step turns by 2 atan(0.01 dt / 2).
  const double phi = 400.0 * 2.0 * std::atan(0.01 * kDt / 2.0);
  EXPECT_NEAR(phi, 0.02, 1e-9);
  // |(1,0,0,0) - (cos(phi/2), sin(phi/2), 0, 0)| = 2 sin(phi/4).
  EXPECT_NEAR(loss, 2.0 * std::sin(phi / 4.0), 1e-12);

  // Brute-force integration with the Hamilton product.
  Quat q;
  for (int k = 0; k < 400; ++k)
  {
    q = QuatMul(q, Quat{1.0, 0.01 * kDt / 2.0, 0.0, 0.0});
    const double n = gyrocal::testing::Norm(q);
    q = {q.w / n, q.x / n, q.y / n, q.z / n};
  }
  EXPECT_NEAR(loss, std::sqrt((1.0 - q.w) * (1.0 - q.w) + q.x * q.x + q.y * q.y + q.z * q.z), 1e-12);
}

TEST(SegmentLoss, StartIndexSkipsEarlierSamples)
{
  Gen gen(84);
  Segment s = SelfConsistentSegment(gen, 80, 30);
  const double base = SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s);
  EXPECT_LT(base, 1e-15);
  for (std::size_t k = 0; k < 30; ++k)
    s.raw[k] = gen.Vector(-5, 5);
  EXPECT_EQ(SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s), base);
}

TEST(SegmentLoss, UnobservableYawIsIgnored)
{
  Gen gen(85);
  Segment s = SelfConsistentSegment(gen, 100, 0);
  s.q_end = QuatMul(AxisAngle({0, 0, 1}, 0.3), s.q_end); // heading error only
  EXPECT_GT(SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s), 0.1);
  s.end_yaw_observable = false;
  EXPECT_LT(SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s), 1e-12);

  // A tilt error is still seen.
  s.q_end = QuatMul(AxisAngle({1, 0, 0}, 0.01), s.q_end);
  EXPECT_GT(SegmentLoss(CalibNetParams::Identity(), nullptr, 1, s), 4e-3);
}

TEST(SegmentLoss, RejectsMalformedSegments)
{
  Gen gen(86);
  const Segment good = SelfConsistentSegment(gen, 60, 49);
  const CalibNetParams id = CalibNetParams::Identity();
  const DenoiseNetParams den = InitDenoiseNet(1);

  Segment bad = good;
  bad.timestamps.pop_back();
  EXPECT_THROW(SegmentLoss(id, nullptr, 1, bad), InvalidArgument);
  bad = good;
  bad.timestamps[5] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(SegmentLoss(id, nullptr, 1, bad), InvalidArgument);
  bad = good;
  bad.timestamps[5] = bad.timestamps[4];
  EXPECT_THROW(SegmentLoss(id, nullptr, 1, bad), InvalidArgument);
  bad = good;
  bad.q_end.w *= 1.1;
  EXPECT_THROW(SegmentLoss(id, nullptr, 1, bad), InvalidArgument);
  bad = good;
  bad.start_index = 59;
  EXPECT_THROW(SegmentLoss(id, nullptr, 1, bad), InvalidArgument);

  EXPECT_NO_THROW(SegmentLoss(id, &den, 50, good));
  EXPECT_THROW(SegmentLoss(id, &den, 51, good), InvalidArgument);
  EXPECT_THROW(SegmentLoss(id, &den, 15, good), InvalidArgument);
}

TEST(Gradient, CalibrationMatchesFiniteDifferences)
{
  Gen gen(0);
  const SegmentDataset data = RandomDataset(gen, 3, 20, 0);
  const CalibNetParams p = gen.Calib(0.1);
  const LossGradient lg = CalibrationLossGradient(p, data);
  EXPECT_NEAR(lg.loss, MeanSegmentLoss(p, nullptr, 1, data), 1e-15);
  const std::vector<double> x = Flatten(p);
  ASSERT_EQ(lg.gradient.size(), 27u);
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    ASSERT_TRUE(SmoothAround(x, i, 1e-4, [&](const std::vector<double>& v) {
      return ActivationSigns(Unflatten<CalibNetParams, double>(v), nullptr, data);
    }));
    const double fd = CentralDifference(x, i, 1e-4, [&](const std::vector<double>& v) {
      return MeanSegmentLoss(Unflatten<CalibNetParams, double>(v), nullptr, 1, data);
    });
    EXPECT_LE(std::abs(lg.gradient[i] - fd), std::max(1e-8, 1e-4 * std::abs(fd))) << CalibParamName(i);
  }
}

TEST(Gradient, DenoiserMatchesFiniteDifferences)
{
  Gen gen(87);
  const SegmentDataset data = RandomDataset(gen, 2, 50, 15);
  const CalibNetParams c = gen.Calib(0.1);
  const DenoiseNetParams d = gen.Denoiser(0.3);
  const LossGradient lg = DenoiserLossGradient(c, d, 16, data);
  const LossGradient joint = JointLossGradient(c, d, 16, data);
  ASSERT_EQ(lg.gradient.size(), 168u);
  ASSERT_EQ(joint.gradient.size(), 195u);
  EXPECT_EQ(joint.loss, lg.loss);
  const std::vector<double> x = Flatten(d);
  std::size_t kinked = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    EXPECT_NEAR(joint.gradient[27 + i], lg.gradient[i], 1e-15);
    const bool smooth = SmoothAround(x, i, 1e-4, [&](const std::vector<double>& v) {
      const auto net = Unflatten<DenoiseNetParams, double>(v);
      return ActivationSigns(c, &net, data);
    });
    if (!smooth)
    {
      ++kinked;
      continue;
    }
    const double fd = CentralDifference(x, i, 1e-4, [&](const std::vector<double>& v) {
      const auto net = Unflatten<DenoiseNetParams, double>(v);
      return MeanSegmentLoss(c, &net, 16, data);
    });
    EXPECT_LE(std::abs(lg.gradient[i] - fd), std::max(1e-8, 1e-4 * std::abs(fd))) << DenoiseParamName(i);
  }
  EXPECT_LT(kinked, x.size() / 10);
}

TEST(Gradient, VanishesAtExactMinimum)
{
  Gen gen(88);
  SegmentDataset data;
  for (int j = 0; j < 5; ++j)
    data.segments.push_back(SelfConsistentSegment(gen, 40, 0));
  const LossGradient lg = CalibrationLossGradient(CalibNetParams::Identity(), data);
  EXPECT_EQ(lg.loss, 0.0);
  double norm = 0.0;
  for (double g : lg.gradient)
    norm += g * g;
  EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(Gradient, IndependentOfEvaluationState)
{
  Gen gen(89);
  const SegmentDataset data = RandomDataset(gen, 4, 30, 0);
  const CalibNetParams p = gen.Calib(0.1);
  const LossGradient a = CalibrationLossGradient(p, data);
  const LossGradient b = CalibrationLossGradient(p, data);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);

  // Reordering segments changes only the summation order.
  SegmentDataset reversed = data;
  std::reverse(reversed.segments.begin(), reversed.segments.end());
  const LossGradient c = CalibrationLossGradient(p, reversed);
  EXPECT_NEAR(c.loss, a.loss, 1e-15);
  for (std::size_t i = 0; i < a.gradient.size(); ++i)
    EXPECT_NEAR(c.gradient[i], a.gradient[i], 1e-12);
}

TEST(TrainCalibration, DeterministicReruns)
{
  Gen gen(90);
  const SegmentDataset data = RandomDataset(gen, 4, 40, 0);
  TrainConfig cfg;
  cfg.epochs = 30;
  const TrainResult a = TrainCalibration(data, cfg);
  const TrainResult b = TrainCalibration(data, cfg);
  EXPECT_EQ(Flatten(a.calib), Flatten(b.calib));
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_EQ(a.loss_trace.size(), 30u);
}

TEST(TrainCalibration, TraceAndSelection)
{
  Gen gen(91);
  const SegmentDataset data = RandomDataset(gen, 4, 40, 0);
  TrainConfig cfg;
  cfg.epochs = 40;
  std::vector<double> seen;
  cfg.on_epoch = [&](std::size_t epoch, double loss) {
    EXPECT_EQ(epoch, seen.size());
    seen.push_back(loss);
  };
  const TrainResult best = TrainCalibration(data, cfg);
  EXPECT_EQ(seen, best.loss_trace);
  EXPECT_EQ(best.loss_trace.front(), MeanSegmentLoss(CalibNetParams::Identity(), nullptr, 1, data));
  EXPECT_LE(best.final_loss, *std::min_element(best.loss_trace.begin(), best.loss_trace.end()));
  EXPECT_EQ(best.final_loss, MeanSegmentLoss(best.calib, nullptr, 1, data));

  cfg.on_epoch = nullptr;
  cfg.keep_best = false;
  const TrainResult last = TrainCalibration(data, cfg);
  EXPECT_EQ(last.selected_epoch, 40u);
  EXPECT_EQ(last.loss_trace, best.loss_trace);
  EXPECT_EQ(last.final_loss, MeanSegmentLoss(last.calib, nullptr, 1, data));
}

TEST(TrainCalibration, IdentityDistortionStaysIdentity)
{
  DistortionGroundTruth d = DistortionGroundTruth::Identity();
  d.noise_sigma = kDefaultNoiseSigma;
  const SegmentDataset data = SessionDataset(GenTurntableSession(92, d, 6), 1);
  TrainConfig cfg;
  cfg.epochs = 150;
  const TrainResult r = TrainCalibration(data, cfg);
  EXPECT_LE(r.final_loss, 2.0 * r.loss_trace.front());
  const LbnParams m = ProbeAffineMap(r.calib);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(m.e[3 * i + j], i == j ? 1.0 : 0.0, 5e-3);
}

TEST(TrainCalibration, RecoversDistortionDirection)
{
  // Short run: the bias estimate must move most of the way to the truth.
  DistortionGroundTruth d = DistortionGroundTruth::Identity();
  d.b = {0.01, -0.008, 0.005};
  d.noise_sigma = 0.0;
  const SegmentDataset data = SessionDataset(GenTurntableSession(93, d, 8), 1);
  TrainConfig cfg;
  cfg.epochs = 200;
  const TrainResult r = TrainCalibration(data, cfg);
  EXPECT_LT(r.final_loss, 0.1 * r.loss_trace.front());
  const LbnParams m = ProbeAffineMap(r.calib);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(m.b[i], d.b[i], 2e-3);
}

TEST(TrainCalibration, Errors)
{
  TrainConfig cfg;
  EXPECT_THROW(TrainCalibration(SegmentDataset{}, cfg), InvalidArgument);
  Gen gen(94);
  const SegmentDataset data = RandomDataset(gen, 2, 30, 0);
  cfg.epochs = 0;
  EXPECT_THROW(TrainCalibration(data, cfg), InvalidArgument);
}

TEST(TrainCalibration, DivergenceAbortsWithTrace)
{
  Gen gen(95);
  SegmentDataset data = RandomDataset(gen, 2, 30, 0);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 50.0;
  cfg.divergence_factor = 1.5;
  try
  {
    TrainCalibration(data, cfg);
    FAIL() << "training did not diverge";
  }
  catch (const DivergenceError& e)
  {
    EXPECT_GE(e.trace().size(), 2u);
    EXPECT_GT(e.trace().back(), 1.5 * e.trace().front());
  }
}

TEST(TrainDenoiser, CalibrationIsFrozen)
{
  Gen gen(96);
  const SegmentDataset data = RandomDataset(gen, 2, 70, 49);
  const CalibNetParams calib = gen.Calib(0.05);
  const std::vector<double> before = Flatten(calib);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.phase = TrainPhase::kDenoiser;
  const TrainResult r = TrainDenoiser(calib, data, cfg);
  EXPECT_EQ(Flatten(r.calib), before);
  EXPECT_EQ(Flatten(calib), before);
  ASSERT_TRUE(r.denoise.has_value());
  const DenoiseNetParams init = InitDenoiseNet(cfg.seed);
  EXPECT_EQ(r.loss_trace.front(), MeanSegmentLoss(calib, &init, 50, data));
}

TEST(TrainDenoiser, DeterministicAndSeeded)
{
  Gen gen(97);
  const SegmentDataset data = RandomDataset(gen, 2, 70, 49);
  TrainConfig cfg;
  cfg.epochs = 5;
  const TrainResult a = TrainDenoiser(CalibNetParams::Identity(), data, cfg);
  const TrainResult b = TrainDenoiser(CalibNetParams::Identity(), data, cfg);
  EXPECT_EQ(Flatten(*a.denoise), Flatten(*b.denoise));
  cfg.seed = 1;
  const TrainResult c = TrainDenoiser(CalibNetParams::Identity(), data, cfg);
  EXPECT_NE(Flatten(*a.denoise), Flatten(*c.denoise));
  // Segments whose start precedes the first full window are rejected.
  EXPECT_THROW(TrainDenoiser(CalibNetParams::Identity(), RandomDataset(gen, 1, 70, 10), cfg), InvalidArgument);
}
