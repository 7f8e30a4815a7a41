/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#pragma once

// Weight containers.
//
// Deployment container (.tgcn), all integers and floats little-endian:
//
//   offset  size        field
//   0       4           magic "TGCN"
//   4       2           format version (u16, currently 1)
//   6       4           calibration scalar count (u32, always 27)
//   10      4*27        calibration scalars (IEEE-754 binary32)
//   118     4           denoiser scalar count (u32, 168 or 0 when absent)
//   122     4*count     denoiser scalars (IEEE-754 binary32)
//
// Scalars follow the canonical order of ForEachScalar (see net.hpp). A full
// model is 794 bytes.
//
// Training checkpoints are JSON with full double precision; they carry the
// same flat vectors under "calib" and "denoise".

#include "gyrocal/errors.hpp"
#include "gyrocal/net.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace gyrocal
{

struct ModelWeights
{
  CalibNetParams calib = CalibNetParams::Identity();
  std::optional<DenoiseNetParams> denoise;
  // Window length the denoiser was trained with (checkpoints only).
  std::size_t window = 50;
};

enum class WeightErrorKind
{
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kNonFinite,
  kLayoutMismatch,
  kIo,
};

class WeightFormatError : public DataError
{
public:
  WeightFormatError(WeightErrorKind kind, const std::string& what) : DataError(what), m_kind(kind)
  {
  }
  WeightErrorKind kind() const noexcept { return m_kind; }

private:
  WeightErrorKind m_kind;
};

inline constexpr std::uint16_t kWeightFormatVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 6; // magic + version
inline constexpr std::size_t kWeightSectionFraming = 4; // u32 count per section

std::size_t EncodedWeightSize(bool with_denoiser);

// Throws WeightFormatError(kNonFinite) if any scalar is not finite in binary32.
std::vector<std::uint8_t> EncodeWeights(const ModelWeights& weights);
ModelWeights DecodeWeights(std::span<const std::uint8_t> bytes);

void ExportWeights(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights ImportWeights(const std::filesystem::path& path);

void SaveCheckpoint(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights LoadCheckpoint(const std::filesystem::path& path);

// Dispatches on the leading bytes: binary container or JSON checkpoint.
ModelWeights LoadAnyWeights(const std::filesystem::path& path);

} // namespace gyrocal
