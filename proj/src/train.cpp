/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/train.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gyrocal
{
namespace
{
using ad::Var;

bool IsUnit(const Quat& q) { return std::abs(std::sqrt(SquaredNorm(q)) - 1.0) <= 1e-6; }

// Reusable per-thread buffers so every segment does not reallocate the tape.
struct Workspace
{
  ad::Tape tape;
  std::vector<double> adjoints;
  std::vector<Var> leaves;
};

Workspace& ThreadWorkspace()
{
  thread_local Workspace ws;
  return ws;
}

template<typename Net>
Net MakeLeaves(const std::vector<double>& flat, std::vector<Var>& leaves)
{
  leaves.clear();
  for (double v : flat)
    leaves.push_back(Var::Leaf(v));
  return Unflatten<Net, Var>(std::span<const Var>(leaves));
}

void AccumulateGradient(const Var& loss, const Workspace& ws, std::size_t first_leaf,
                        std::vector<double>& gradient_sum, std::vector<double>& adjoints)
{
  if (loss.is_constant())
    return;
  ws.tape.Backward(loss.index(), adjoints);
  for (std::size_t i = 0; i < gradient_sum.size(); ++i)
    gradient_sum[i] += adjoints[ws.leaves[first_leaf + i].index()];
}

void ValidateDataset(const SegmentDataset& data, std::size_t window, bool with_denoiser)
{
  if (data.empty())
    throw InvalidArgument("training dataset is empty");
  for (const Segment& seg : data.segments)
    ValidateSegment(seg, window, with_denoiser);
}

void CheckDivergence(double loss, double initial, double factor, std::size_t epoch,
                     const std::vector<double>& trace)
{
  if (!std::isfinite(loss))
    throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch), trace);
  if (initial > 0.0 && loss > factor * initial)
    throw DivergenceError("loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                              " exceeds " + std::to_string(factor) + "x the initial loss",
                          trace);
}

// Lowest-loss parameters seen so far; the earliest wins ties.
struct BestIterate
{
  double loss = std::numeric_limits<double>::infinity();
  std::size_t epoch = 0;
  std::vector<double> params;

  void Offer(double candidate, std::size_t at, const std::vector<double>& current)
  {
    if (candidate < loss)
    {
      loss = candidate;
      epoch = at;
      params = current;
    }
  }
};
} // namespace

void ValidateSegment(const Segment& seg, std::size_t window, bool with_denoiser)
{
  if (seg.timestamps.size() != seg.raw.size())
    throw InvalidArgument("segment has " + std::to_string(seg.timestamps.size()) + " timestamps but " +
                          std::to_string(seg.raw.size()) + " samples");
  if (seg.size() < 2 || seg.start_index + 1 >= seg.size())
    throw InvalidArgument("segment start index leaves nothing to integrate");
  for (std::size_t k = 0; k < seg.size(); ++k)
  {
    if (!std::isfinite(seg.timestamps[k]))
      throw InvalidArgument("segment timestamp " + std::to_string(k) + " is not finite");
    if (k > 0 && !(seg.timestamps[k] > seg.timestamps[k - 1]))
      throw InvalidArgument("segment timestamps are not strictly increasing");
    for (double v : seg.raw[k])
      if (!std::isfinite(v))
        throw InvalidArgument("segment sample " + std::to_string(k) + " is not finite");
  }
  if (!IsUnit(seg.q_start) || !IsUnit(seg.q_end))
    throw InvalidArgument("segment reference quaternions must be unit");
  if (with_denoiser)
  {
    if (window < DenoiseNetParams::kReceptiveField)
      throw InvalidArgument("denoiser window " + std::to_string(window) +
                            " is shorter than the receptive field");
    if (seg.start_index + 1 < window)
      throw InvalidArgument("segment start index " + std::to_string(seg.start_index) +
                            " is before the first full denoiser window (n - 1 = " +
                            std::to_string(window - 1) + ")");
  }
}

double SegmentLoss(const CalibNetParams& calib, const DenoiseNetParams* denoise, std::size_t window,
                   const Segment& seg)
{
  ValidateSegment(seg, window, denoise != nullptr);
  const std::vector<Vec3> rates = SegmentRates<double>(calib, denoise, seg);
  return EndpointLoss<double>(rates, seg);
}

double MeanSegmentLoss(const CalibNetParams& calib, const DenoiseNetParams* denoise,
                       std::size_t window, const SegmentDataset& data)
{
  if (data.empty())
    throw InvalidArgument("MeanSegmentLoss: empty dataset");
  double sum = 0.0;
  for (const Segment& seg : data.segments)
    sum += SegmentLoss(calib, denoise, window, seg);
  return sum / static_cast<double>(data.size());
}

LossGradient CalibrationLossGradient(const CalibNetParams& calib, const SegmentDataset& data)
{
  if (data.empty())
    throw InvalidArgument("CalibrationLossGradient: empty dataset");
  Workspace& ws = ThreadWorkspace();
  const std::vector<double> flat = Flatten(calib);
  LossGradient out;
  out.gradient.assign(flat.size(), 0.0);

  for (const Segment& seg : data.segments)
  {
    ws.tape.Clear();
    ad::TapeScope scope(ws.tape);
    const auto net = MakeLeaves<BasicCalibNet<Var>>(flat, ws.leaves);
    const std::vector<BasicVec3<Var>> rates = SegmentRates<Var>(net, nullptr, seg);
    const Var loss = EndpointLoss<Var>(rates, seg);
    out.loss += loss.value();
    AccumulateGradient(loss, ws, 0, out.gradient, ws.adjoints);
  }
  const double scale = 1.0 / static_cast<double>(data.size());
  out.loss *= scale;
  for (double& g : out.gradient)
    g *= scale;
  return out;
}

LossGradient DenoiserLossGradient(const CalibNetParams& calib, const DenoiseNetParams& denoise,
                                  std::size_t window, const SegmentDataset& data)
{
  if (data.empty())
    throw InvalidArgument("DenoiserLossGradient: empty dataset");
  (void)window;
  Workspace& ws = ThreadWorkspace();
  const std::vector<double> flat = Flatten(denoise);
  const auto fixed_calib = CastNet<Var, BasicCalibNet>(calib);
  LossGradient out;
  out.gradient.assign(flat.size(), 0.0);

  for (const Segment& seg : data.segments)
  {
    ws.tape.Clear();
    ad::TapeScope scope(ws.tape);
    const auto net = MakeLeaves<BasicDenoiseNet<Var>>(flat, ws.leaves);
    const std::vector<BasicVec3<Var>> rates = SegmentRates<Var>(fixed_calib, &net, seg);
    const Var loss = EndpointLoss<Var>(rates, seg);
    out.loss += loss.value();
    AccumulateGradient(loss, ws, 0, out.gradient, ws.adjoints);
  }
  const double scale = 1.0 / static_cast<double>(data.size());
  out.loss *= scale;
  for (double& g : out.gradient)
    g *= scale;
  return out;
}

LossGradient JointLossGradient(const CalibNetParams& calib, const DenoiseNetParams& denoise,
                               std::size_t window, const SegmentDataset& data)
{
  if (data.empty())
    throw InvalidArgument("JointLossGradient: empty dataset");
  (void)window;
  Workspace& ws = ThreadWorkspace();
  std::vector<double> flat = Flatten(calib);
  const std::vector<double> flat_denoise = Flatten(denoise);
  flat.insert(flat.end(), flat_denoise.begin(), flat_denoise.end());
  LossGradient out;
  out.gradient.assign(flat.size(), 0.0);

  for (const Segment& seg : data.segments)
  {
    ws.tape.Clear();
    ad::TapeScope scope(ws.tape);
    ws.leaves.clear();
    for (double v : flat)
      ws.leaves.push_back(Var::Leaf(v));
    const std::span<const Var> all(ws.leaves);
    const auto c = Unflatten<BasicCalibNet<Var>, Var>(all.first(CalibNetParams::kSize));
    const auto d = Unflatten<BasicDenoiseNet<Var>, Var>(all.subspan(CalibNetParams::kSize));
    const std::vector<BasicVec3<Var>> rates = SegmentRates<Var>(c, &d, seg);
    const Var loss = EndpointLoss<Var>(rates, seg);
    out.loss += loss.value();
    AccumulateGradient(loss, ws, 0, out.gradient, ws.adjoints);
  }
  const double scale = 1.0 / static_cast<double>(data.size());
  out.loss *= scale;
  for (double& g : out.gradient)
    g *= scale;
  return out;
}

TrainResult TrainCalibration(const SegmentDataset& data, const TrainConfig& config,
                             const CalibNetParams& initial)
{
  if (config.epochs == 0)
    throw InvalidArgument("TrainCalibration: epochs must be at least 1");
  ValidateDataset(data, 1, false);

  std::vector<double> params = Flatten(initial);
  AdamW optimizer(params.size(),
                  AdamWConfig{.learning_rate = config.learning_rate, .weight_decay = config.weight_decay},
                  CalibParamName);
  TrainResult result;
  result.loss_trace.reserve(config.epochs);

  BestIterate best;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch)
  {
    const auto net = Unflatten<CalibNetParams, double>(params);
    const LossGradient lg = CalibrationLossGradient(net, data);
    result.loss_trace.push_back(lg.loss);
    CheckDivergence(lg.loss, result.loss_trace.front(), config.divergence_factor, epoch,
                    result.loss_trace);
    best.Offer(lg.loss, epoch, params);
    optimizer.Step(params, lg.gradient);
    if (config.on_epoch)
      config.on_epoch(epoch, lg.loss);
  }

  const double last_loss = MeanSegmentLoss(Unflatten<CalibNetParams, double>(params), nullptr, 1, data);
  best.Offer(last_loss, config.epochs, params);
  result.selected_epoch = config.keep_best ? best.epoch : config.epochs;
  result.final_loss = config.keep_best ? best.loss : last_loss;
  result.calib = Unflatten<CalibNetParams, double>(config.keep_best ? best.params : params);
  return result;
}

TrainResult TrainDenoiser(const CalibNetParams& calib, const SegmentDataset& data,
                          const TrainConfig& config, const std::optional<DenoiseNetParams>& initial)
{
  if (config.epochs == 0)
    throw InvalidArgument("TrainDenoiser: epochs must be at least 1");
  ValidateDataset(data, config.window, true);

  std::vector<double> params = Flatten(initial ? *initial : InitDenoiseNet(config.seed));
  AdamW optimizer(params.size(),
                  AdamWConfig{.learning_rate = config.learning_rate, .weight_decay = config.weight_decay},
                  DenoiseParamName);
  TrainResult result;
  result.calib = calib;
  result.loss_trace.reserve(config.epochs);

  BestIterate best;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch)
  {
    const auto net = Unflatten<DenoiseNetParams, double>(params);
    const LossGradient lg = DenoiserLossGradient(calib, net, config.window, data);
    result.loss_trace.push_back(lg.loss);
    CheckDivergence(lg.loss, result.loss_trace.front(), config.divergence_factor, epoch,
                    result.loss_trace);
    best.Offer(lg.loss, epoch, params);
    optimizer.Step(params, lg.gradient);
    if (config.on_epoch)
      config.on_epoch(epoch, lg.loss);
  }

  const auto last = Unflatten<DenoiseNetParams, double>(params);
  const double last_loss = MeanSegmentLoss(calib, &last, config.window, data);
  best.Offer(last_loss, config.epochs, params);
  result.selected_epoch = config.keep_best ? best.epoch : config.epochs;
  result.final_loss = config.keep_best ? best.loss : last_loss;
  result.denoise = Unflatten<DenoiseNetParams, double>(config.keep_best ? best.params : params);
  return result;
}

} // namespace gyrocal
