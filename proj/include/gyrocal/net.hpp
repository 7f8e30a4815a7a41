/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Calibration and denoising subnets.
//
// Calibration: y = LBN2(PReLU(LBN1(w))) + LBN1(w), each LBN an affine map
// E*w + B. 27 trainable scalars.
//
// Denoising: per-axis causal filter over the newest N calibrated samples of
// one axis. conv1 (1->4, 7 taps) -> LeakyReLU -> conv2 (4->5, 5 taps) ->
// LeakyReLU -> conv3 (5->1, 6 taps), valid convolutions, newest output read
// out. 168 trainable scalars shared by the three axes. The receptive field is
// 16 samples, so only the newest 16 samples of a window affect the output.
//
// Tap convention: output[t] = sum_k w[o][i][k] * in_i[t - (taps - 1) + k] + b[o],
// i.e. the last tap multiplies the newest sample.

#include "gyrocal/autodiff.hpp"
#include "gyrocal/quat.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gyrocal
{

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kInitialPreluSlope = 0.25;

template<typename T>
struct BasicLbn
{
  std::array<T, 9> e{}; // row-major
  BasicVec3<T> b{};

  static constexpr std::size_t kSize = 12;
};

template<typename T>
struct BasicCalibNet
{
  BasicLbn<T> lbn1;
  BasicLbn<T> lbn2;
  BasicVec3<T> prelu_slopes{};

  static constexpr std::size_t kSize = 2 * BasicLbn<T>::kSize + 3;

  // lbn1 = identity, lbn2 = zero map, slopes = 0.25: exactly the identity map.
  static BasicCalibNet Identity()
  {
    BasicCalibNet net;
    net.lbn1.e = {T{1.0}, T{0.0}, T{0.0}, T{0.0}, T{1.0}, T{0.0}, T{0.0}, T{0.0}, T{1.0}};
    net.lbn1.b = {T{0.0}, T{0.0}, T{0.0}};
    net.lbn2.e.fill(T{0.0});
    net.lbn2.b = {T{0.0}, T{0.0}, T{0.0}};
    net.prelu_slopes = {T{kInitialPreluSlope}, T{kInitialPreluSlope}, T{kInitialPreluSlope}};
    return net;
  }
};

template<typename T, int In, int Out, int Taps>
struct BasicConv1d
{
  static constexpr int kIn = In;
  static constexpr int kOut = Out;
  static constexpr int kTaps = Taps;
  static constexpr std::size_t kSize = static_cast<std::size_t>(Out * In * Taps + Out);

  std::array<T, Out * In * Taps> weights{}; // [out][in][tap]
  std::array<T, Out> bias{};

  T& weight(int out, int in, int tap) { return weights[(out * In + in) * Taps + tap]; }
  const T& weight(int out, int in, int tap) const { return weights[(out * In + in) * Taps + tap]; }
};

template<typename T>
struct BasicDenoiseNet
{
  BasicConv1d<T, 1, 4, 7> conv1;
  BasicConv1d<T, 4, 5, 5> conv2;
  BasicConv1d<T, 5, 1, 6> conv3;

  static constexpr std::size_t kSize =
      decltype(conv1)::kSize + decltype(conv2)::kSize + decltype(conv3)::kSize;
  static constexpr std::size_t kReceptiveField =
      decltype(conv1)::kTaps + decltype(conv2)::kTaps - 1 + decltype(conv3)::kTaps - 1;
};

using LbnParams = BasicLbn<double>;
using CalibNetParams = BasicCalibNet<double>;
using DenoiseNetParams = BasicDenoiseNet<double>;

static_assert(CalibNetParams::kSize == 27);
static_assert(DenoiseNetParams::kSize == 168);
static_assert(DenoiseNetParams::kReceptiveField == 16);

// Visits every trainable scalar in canonical order: lbn1.E (row-major),
// lbn1.B, lbn2.E, lbn2.B, slopes; per conv layer weights [out][in][tap], then
// biases. This order is shared by optimisation, export and naming.
template<typename Net, typename F>
void ForEachScalar(Net& net, F&& f)
{
  if constexpr (requires { net.prelu_slopes; })
  {
    for (auto* lbn : {&net.lbn1, &net.lbn2})
    {
      for (auto& v : lbn->e)
        f(v);
      for (auto& v : lbn->b)
        f(v);
    }
    for (auto& v : net.prelu_slopes)
      f(v);
  }
  else
  {
    auto layer = [&f](auto& conv) {
      for (auto& v : conv.weights)
        f(v);
      for (auto& v : conv.bias)
        f(v);
    };
    layer(net.conv1);
    layer(net.conv2);
    layer(net.conv3);
  }
}

template<typename Net>
std::vector<double> Flatten(const Net& net)
{
  std::vector<double> out;
  out.reserve(Net::kSize);
  ForEachScalar(net, [&out](const auto& v) { out.push_back(ad::Value(v)); });
  return out;
}

template<typename Net, typename Scalar>
Net Unflatten(std::span<const Scalar> flat)
{
  if (flat.size() != Net::kSize)
    throw InvalidArgument("Unflatten: expected " + std::to_string(Net::kSize) + " scalars, got " +
                          std::to_string(flat.size()));
  Net net;
  std::size_t i = 0;
  ForEachScalar(net, [&](auto& v) { v = flat[i++]; });
  return net;
}

// Lifts double parameters to another scalar type (e.g. ad::Var constants).
template<typename T, template<typename> class NetT>
NetT<T> CastNet(const NetT<double>& net)
{
  NetT<T> out;
  std::size_t i = 0;
  const std::vector<double> flat = Flatten(net);
  ForEachScalar(out, [&](auto& v) { v = T{flat[i++]}; });
  return out;
}

std::size_t ParamCount(const CalibNetParams& net);
std::size_t ParamCount(const DenoiseNetParams& net);
std::size_t ParamCount(const CalibNetParams& calib, const DenoiseNetParams& denoise);

// Human-readable name of the scalar at canonical index `i`, e.g. "lbn1.E[0][2]".
std::string CalibParamName(std::size_t i);
std::string DenoiseParamName(std::size_t i);

// Conv weights uniform in [-0.05, 0.05], biases zero, seeded.
DenoiseNetParams InitDenoiseNet(std::uint64_t seed);

template<typename T>
BasicVec3<T> LbnForward(const BasicLbn<T>& p, const BasicVec3<T>& omega)
{
  const std::span<const T> in(omega);
  const std::span<const T> e(p.e);
  return {ad::AffineDot(e.subspan(0, 3), in, p.b[0]), ad::AffineDot(e.subspan(3, 3), in, p.b[1]),
          ad::AffineDot(e.subspan(6, 3), in, p.b[2])};
}

template<typename T>
BasicVec3<T> CalibForward(const BasicCalibNet<T>& p, const BasicVec3<T>& omega_raw)
{
  const BasicVec3<T> h = LbnForward(p.lbn1, omega_raw);
  const BasicVec3<T> a{ad::Prelu(h[0], p.prelu_slopes[0]), ad::Prelu(h[1], p.prelu_slopes[1]),
                       ad::Prelu(h[2], p.prelu_slopes[2])};
  const BasicVec3<T> g = LbnForward(p.lbn2, a);
  return {g[0] + h[0], g[1] + h[1], g[2] + h[2]};
}

// Denoised outputs for every index k in [first, x.size()), each computed from
// the window ending at k. Requires first >= kReceptiveField - 1. Intermediate
// feature maps are shared between overlapping windows; because the
// convolutions are valid, this equals evaluating every window separately.
template<typename T>
std::vector<T> DenoiseTail(const BasicDenoiseNet<T>& net, std::span<const T> x, std::size_t first)
{
  using Net = BasicDenoiseNet<T>;
  constexpr int k1 = decltype(net.conv1)::kTaps;
  constexpr int k2 = decltype(net.conv2)::kTaps;
  constexpr int k3 = decltype(net.conv3)::kTaps;
  constexpr int c1 = decltype(net.conv1)::kOut;
  constexpr int c2 = decltype(net.conv2)::kOut;

  if (first + 1 < Net::kReceptiveField)
    throw InvalidArgument("DenoiseTail: window shorter than the receptive field");
  const std::size_t length = x.size();
  if (first >= length)
    return {};

  // Feature maps are stored from the first position any output needs.
  const std::size_t start2 = first - (k3 - 1);
  const std::size_t start1 = start2 - (k2 - 1);
  const std::size_t n1 = length - start1;
  const std::size_t n2 = length - start2;

  std::vector<T> h1(static_cast<std::size_t>(c1) * n1);
  for (int c = 0; c < c1; ++c)
  {
    const std::span<const T> w(net.conv1.weights.data() + c * k1, k1);
    for (std::size_t p = 0; p < n1; ++p)
    {
      const std::size_t t = start1 + p;
      const T pre = ad::AffineDot(w, x.subspan(t + 1 - k1, k1), net.conv1.bias[c]);
      h1[c * n1 + p] = ad::Leaky(pre, kLeakySlope);
    }
  }

  std::vector<T> h2(static_cast<std::size_t>(c2) * n2);
  std::array<T, c1 * k2> gather2{};
  for (std::size_t p = 0; p < n2; ++p)
  {
    const std::size_t p1 = p + (k2 - 1); // index into h1 of the newest tap
    for (int i = 0; i < c1; ++i)
      for (int k = 0; k < k2; ++k)
        gather2[i * k2 + k] = h1[i * n1 + p1 + 1 - k2 + k];
    for (int o = 0; o < c2; ++o)
    {
      const std::span<const T> w(net.conv2.weights.data() + o * c1 * k2, c1 * k2);
      const T pre = ad::AffineDot(w, std::span<const T>(gather2), net.conv2.bias[o]);
      h2[o * n2 + p] = ad::Leaky(pre, kLeakySlope);
    }
  }

  std::vector<T> y;
  y.reserve(length - first);
  std::array<T, c2 * k3> gather3{};
  const std::span<const T> w3(net.conv3.weights);
  for (std::size_t t = first; t < length; ++t)
  {
    const std::size_t p2 = t - start2;
    for (int i = 0; i < c2; ++i)
      for (int k = 0; k < k3; ++k)
        gather3[i * k3 + k] = h2[i * n2 + p2 + 1 - k3 + k];
    y.push_back(ad::AffineDot(w3, std::span<const T>(gather3), net.conv3.bias[0]));
  }
  return y;
}

// Double-precision API with validation.

Vec3 LbnForward(const LbnParams& p, const Vec3& omega_raw);
Vec3 CalibForward(const CalibNetParams& p, const Vec3& omega_raw);

// Denoised estimate at the newest sample of `window`; rejects windows shorter
// than the receptive field.
double DenoiseForward(const DenoiseNetParams& p, std::span<const double> window);

// Samples k >= window - 1 are denoised from [k - window + 1, k]; earlier samples
// pass through. Axes are processed independently with the shared parameters.
std::vector<Vec3> DenoiseSequence(const DenoiseNetParams& p, std::span<const Vec3> calibrated,
                                  std::size_t window);

std::vector<Vec3> CalibrateSequence(const CalibNetParams& p, std::span<const Vec3> raw);

// Effective affine map probed with basis inputs: B = f(0), E[:, j] = f(e_j) - f(0).
LbnParams ProbeAffineMap(const CalibNetParams& p);

} // namespace gyrocal
