/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/net.hpp"

#include <cmath>
#include <random>

namespace gyrocal
{
namespace
{
constexpr double kInitWeightRange = 0.05;

template<typename Conv>
bool NameInLayer(std::size_t& i, const char* layer, std::string& out)
{
  constexpr std::size_t weights = Conv::kSize - Conv::kOut;
  if (i < weights)
  {
    const std::size_t tap = i % Conv::kTaps;
    const std::size_t in = (i / Conv::kTaps) % Conv::kIn;
    const std::size_t o = i / (Conv::kTaps * Conv::kIn);
    out = std::string(layer) + ".w[" + std::to_string(o) + "][" + std::to_string(in) + "][" +
          std::to_string(tap) + "]";
    return true;
  }
  if (i < Conv::kSize)
  {
    out = std::string(layer) + ".b[" + std::to_string(i - weights) + "]";
    return true;
  }
  i -= Conv::kSize;
  return false;
}
} // namespace

std::size_t ParamCount(const CalibNetParams&) { return CalibNetParams::kSize; }
std::size_t ParamCount(const DenoiseNetParams&) { return DenoiseNetParams::kSize; }
std::size_t ParamCount(const CalibNetParams& calib, const DenoiseNetParams& denoise)
{
  return ParamCount(calib) + ParamCount(denoise);
}

std::string CalibParamName(std::size_t i)
{
  if (i >= CalibNetParams::kSize)
    throw InvalidArgument("CalibParamName: index out of range");
  if (i >= 2 * LbnParams::kSize)
    return "prelu.slope[" + std::to_string(i - 2 * LbnParams::kSize) + "]";
  const std::string lbn = i < LbnParams::kSize ? "lbn1" : "lbn2";
  const std::size_t j = i % LbnParams::kSize;
  if (j < 9)
    return lbn + ".E[" + std::to_string(j / 3) + "][" + std::to_string(j % 3) + "]";
  return lbn + ".B[" + std::to_string(j - 9) + "]";
}

std::string DenoiseParamName(std::size_t i)
{
  if (i >= DenoiseNetParams::kSize)
    throw InvalidArgument("DenoiseParamName: index out of range");
  std::string out;
  DenoiseNetParams net;
  if (NameInLayer<decltype(net.conv1)>(i, "conv1", out))
    return out;
  if (NameInLayer<decltype(net.conv2)>(i, "conv2", out))
    return out;
  NameInLayer<decltype(net.conv3)>(i, "conv3", out);
  return out;
}

DenoiseNetParams InitDenoiseNet(std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-kInitWeightRange, kInitWeightRange);
  DenoiseNetParams net;
  auto init = [&](auto& conv) {
    for (double& w : conv.weights)
      w = uniform(rng);
    conv.bias.fill(0.0);
  };
  init(net.conv1);
  init(net.conv2);
  init(net.conv3);
  return net;
}

Vec3 LbnForward(const LbnParams& p, const Vec3& omega_raw)
{
  return LbnForward<double>(p, omega_raw);
}

Vec3 CalibForward(const CalibNetParams& p, const Vec3& omega_raw)
{
  return CalibForward<double>(p, omega_raw);
}

double DenoiseForward(const DenoiseNetParams& p, std::span<const double> window)
{
  if (window.size() < DenoiseNetParams::kReceptiveField)
    throw InvalidArgument("DenoiseForward: window of " + std::to_string(window.size()) +
                          " samples is shorter than the receptive field (" +
                          std::to_string(DenoiseNetParams::kReceptiveField) + ")");
  return DenoiseTail<double>(p, window, window.size() - 1).back();
}

std::vector<Vec3> DenoiseSequence(const DenoiseNetParams& p, std::span<const Vec3> calibrated,
                                  std::size_t window)
{
  if (window < DenoiseNetParams::kReceptiveField)
    throw InvalidArgument("DenoiseSequence: window shorter than the receptive field");
  std::vector<Vec3> out(calibrated.begin(), calibrated.end());
  if (calibrated.size() < window)
    return out;

  std::vector<double> axis(calibrated.size());
  for (int a = 0; a < 3; ++a)
  {
    for (std::size_t k = 0; k < calibrated.size(); ++k)
      axis[k] = calibrated[k][a];
    const std::vector<double> y = DenoiseTail<double>(p, axis, window - 1);
    for (std::size_t k = 0; k < y.size(); ++k)
      out[window - 1 + k][a] = y[k];
  }
  return out;
}

std::vector<Vec3> CalibrateSequence(const CalibNetParams& p, std::span<const Vec3> raw)
{
  std::vector<Vec3> out;
  out.reserve(raw.size());
  for (const Vec3& w : raw)
    out.push_back(CalibForward(p, w));
  return out;
}

LbnParams ProbeAffineMap(const CalibNetParams& p)
{
  LbnParams affine;
  affine.b = CalibForward(p, Vec3{0.0, 0.0, 0.0});
  for (int j = 0; j < 3; ++j)
  {
    Vec3 basis{0.0, 0.0, 0.0};
    basis[j] = 1.0;
    const Vec3 column = CalibForward(p, basis);
    for (int i = 0; i < 3; ++i)
      affine.e[i * 3 + j] = column[i] - affine.b[i];
  }
  return affine;
}

} // namespace gyrocal
