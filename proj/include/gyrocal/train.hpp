/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Segment loss and the two-phase training schedule.
//
// Loss for one segment: calibrate every raw sample, optionally denoise with
// the sliding window, start from q_start at the segment's start index,
// integrate sample by sample (dt from consecutive timestamps) up to the last
// sample, and score the result against q_end with the hemisphere-aligned
// quaternion difference.
//
// Phase 1 trains the calibration subnet alone. Phase 2 freezes it and trains
// the denoiser. Each epoch takes one full-batch AdamW step on the mean
// segment loss; segments are accumulated in dataset order, so runs are
// bit-reproducible. By default the iterate with the lowest training loss is
// returned: with a fixed step size AdamW ends in a small limit cycle around
// the minimum rather than at it.

#include "gyrocal/adamw.hpp"
#include "gyrocal/autodiff.hpp"
#include "gyrocal/data_io.hpp"
#include "gyrocal/net.hpp"
#include "gyrocal/quat.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gyrocal
{

enum class TrainPhase
{
  kCalibration,
  kDenoiser,
};

struct TrainConfig
{
  std::size_t epochs = 2000;
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  std::size_t window = 50;        // N
  std::size_t segment_length = 400; // M
  std::uint64_t seed = 0;
  TrainPhase phase = TrainPhase::kCalibration;
  // Return the iterate with the lowest training loss instead of the last one.
  bool keep_best = true;
  // Loss above this multiple of the first epoch's loss aborts training.
  double divergence_factor = 1e3;
  // Called after every epoch with (epoch, mean loss before the step).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainResult
{
  CalibNetParams calib;
  std::optional<DenoiseNetParams> denoise;
  std::vector<double> loss_trace; // mean loss per epoch, before that epoch's step
  double final_loss = 0.0;        // mean loss at the returned parameters
  std::size_t selected_epoch = 0; // epochs taken before the returned parameters
};

class DivergenceError : public NumericError
{
public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : NumericError(what), m_trace(std::move(trace))
  {
  }
  const std::vector<double>& trace() const noexcept { return m_trace; }

private:
  std::vector<double> m_trace;
};

struct LossGradient
{
  double loss = 0.0;
  std::vector<double> gradient;
};

// Attitude after integrating `rates` over [seg.start_index, seg.size() - 1],
// scored against seg.q_end. Gravity-only end references (yaw unobservable)
// are rotated about the vertical to the estimate's heading first.
template<typename T>
T EndpointLoss(std::span<const BasicVec3<T>> rates, const Segment& seg)
{
  BasicQuat<T> q{T{seg.q_start.w}, T{seg.q_start.x}, T{seg.q_start.y}, T{seg.q_start.z}};
  for (std::size_t k = seg.start_index; k + 1 < seg.size(); ++k)
    q = IntegrateStepUnchecked(q, rates[k], seg.timestamps[k + 1] - seg.timestamps[k]);

  BasicQuat<T> reference{T{seg.q_end.w}, T{seg.q_end.x}, T{seg.q_end.y}, T{seg.q_end.z}};
  if (!seg.end_yaw_observable)
  {
    const T yaw_shift = YawRadians(q) - T{YawRadians(seg.q_end)};
    reference = Multiply(YawQuat(yaw_shift), reference);
  }
  return QuatDiffUnchecked(reference, q);
}

// Calibrated (and, with a denoiser, denoised) rates for one segment. With a
// denoiser, samples from seg.start_index on are denoised; the caller
// guarantees start_index >= window - 1 so every window lies in the segment.
template<typename T>
std::vector<BasicVec3<T>> SegmentRates(const BasicCalibNet<T>& calib, const BasicDenoiseNet<T>* denoise,
                                       const Segment& seg)
{
  std::vector<BasicVec3<T>> rates;
  rates.reserve(seg.size());
  for (const Vec3& raw : seg.raw)
    rates.push_back(CalibForward(calib, BasicVec3<T>{T{raw[0]}, T{raw[1]}, T{raw[2]}}));
  if (denoise == nullptr)
    return rates;

  const std::size_t first = seg.start_index;
  std::vector<T> axis(seg.size());
  std::vector<BasicVec3<T>> out = rates;
  for (int a = 0; a < 3; ++a)
  {
    for (std::size_t k = 0; k < seg.size(); ++k)
      axis[k] = rates[k][a];
    // Only the newest kReceptiveField samples of each window matter.
    const std::vector<T> y = DenoiseTail(*denoise, std::span<const T>(axis), first);
    for (std::size_t k = 0; k < y.size(); ++k)
      out[first + k][a] = y[k];
  }
  return out;
}

// Throws InvalidArgument for malformed segments (sizes, timestamps,
// non-unit references, start index incompatible with the window).
void ValidateSegment(const Segment& seg, std::size_t window, bool with_denoiser);

double SegmentLoss(const CalibNetParams& calib, const DenoiseNetParams* denoise, std::size_t window,
                   const Segment& seg);

double MeanSegmentLoss(const CalibNetParams& calib, const DenoiseNetParams* denoise,
                       std::size_t window, const SegmentDataset& data);

// Mean loss over the dataset and its exact gradient with respect to the 27
// calibration scalars (canonical order).
LossGradient CalibrationLossGradient(const CalibNetParams& calib, const SegmentDataset& data);

// Same, with respect to the 168 denoiser scalars; calibration is held fixed.
LossGradient DenoiserLossGradient(const CalibNetParams& calib, const DenoiseNetParams& denoise,
                                  std::size_t window, const SegmentDataset& data);

// Gradient with respect to all 195 scalars: calibration first, then denoiser.
LossGradient JointLossGradient(const CalibNetParams& calib, const DenoiseNetParams& denoise,
                               std::size_t window, const SegmentDataset& data);

TrainResult TrainCalibration(const SegmentDataset& data, const TrainConfig& config,
                             const CalibNetParams& initial = CalibNetParams::Identity());

// Denoiser starts from InitDenoiseNet(config.seed) unless `initial` is given.
TrainResult TrainDenoiser(const CalibNetParams& calib, const SegmentDataset& data,
                          const TrainConfig& config,
                          const std::optional<DenoiseNetParams>& initial = std::nullopt);

} // namespace gyrocal
