/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/weights.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace gyrocal
{
namespace
{
constexpr std::array<std::uint8_t, 4> kMagic{'T', 'G', 'C', 'N'};

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
  for (int shift = 0; shift < 32; shift += 8)
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

void PutSection(std::vector<std::uint8_t>& out, const std::vector<double>& values,
                const char* section)
{
  PutU32(out, static_cast<std::uint32_t>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
  {
    const float f = static_cast<float>(values[i]);
    if (!std::isfinite(f))
      throw WeightFormatError(WeightErrorKind::kNonFinite, std::string("non-finite ") + section +
                                                               " weight at index " +
                                                               std::to_string(i));
    PutU32(out, std::bit_cast<std::uint32_t>(f));
  }
}

class Reader
{
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : m_bytes(bytes) {}

  void Need(std::size_t n, const char* what) const
  {
    if (m_bytes.size() - m_pos < n)
      throw WeightFormatError(WeightErrorKind::kTruncated,
                              std::string("weight file truncated while reading ") + what);
  }

  std::uint16_t U16(const char* what)
  {
    Need(2, what);
    const auto v = static_cast<std::uint16_t>(m_bytes[m_pos] | (m_bytes[m_pos + 1] << 8));
    m_pos += 2;
    return v;
  }

  std::uint32_t U32(const char* what)
  {
    Need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(m_bytes[m_pos + i]) << (8 * i);
    m_pos += 4;
    return v;
  }

  std::vector<double> Section(std::size_t expected, bool allow_empty, const char* what)
  {
    const std::uint32_t count = U32(what);
    if (count != expected && !(allow_empty && count == 0))
      throw WeightFormatError(WeightErrorKind::kLayoutMismatch,
                              std::string(what) + " section has " + std::to_string(count) +
                                  " scalars, expected " + std::to_string(expected));
    Need(4ull * count, what);
    std::vector<double> values(count);
    for (std::uint32_t i = 0; i < count; ++i)
    {
      const float f = std::bit_cast<float>(U32(what));
      if (!std::isfinite(f))
        throw WeightFormatError(WeightErrorKind::kNonFinite, std::string("non-finite ") + what +
                                                                 " weight at index " +
                                                                 std::to_string(i));
      values[i] = f;
    }
    return values;
  }

  bool AtEnd() const { return m_pos == m_bytes.size(); }
  std::size_t pos() const { return m_pos; }

private:
  std::span<const std::uint8_t> m_bytes;
  std::size_t m_pos = 0;
};

std::vector<std::uint8_t> ReadFile(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw WeightFormatError(WeightErrorKind::kIo, "cannot open weight file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
} // namespace

std::size_t EncodedWeightSize(bool with_denoiser)
{
  return kWeightHeaderBytes + 2 * kWeightSectionFraming +
         4 * (CalibNetParams::kSize + (with_denoiser ? DenoiseNetParams::kSize : 0));
}

std::vector<std::uint8_t> EncodeWeights(const ModelWeights& weights)
{
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  PutU16(out, kWeightFormatVersion);
  PutSection(out, Flatten(weights.calib), "calibration");
  PutSection(out, weights.denoise ? Flatten(*weights.denoise) : std::vector<double>{}, "denoiser");
  return out;
}

ModelWeights DecodeWeights(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kMagic.size())
    throw WeightFormatError(WeightErrorKind::kTruncated, "weight file truncated in magic");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw WeightFormatError(WeightErrorKind::kBadMagic, "weight file has bad magic bytes");

  Reader reader(bytes.subspan(kMagic.size()));
  const std::uint16_t version = reader.U16("version");
  if (version != kWeightFormatVersion)
    throw WeightFormatError(WeightErrorKind::kVersionMismatch,
                            "weight file version " + std::to_string(version) + ", expected " +
                                std::to_string(kWeightFormatVersion));

  ModelWeights weights;
  const std::vector<double> calib = reader.Section(CalibNetParams::kSize, false, "calibration");
  weights.calib = Unflatten<CalibNetParams, double>(calib);
  const std::vector<double> denoise = reader.Section(DenoiseNetParams::kSize, true, "denoiser");
  if (!denoise.empty())
    weights.denoise = Unflatten<DenoiseNetParams, double>(denoise);
  if (!reader.AtEnd())
    throw WeightFormatError(WeightErrorKind::kLayoutMismatch, "trailing bytes after weight payload");
  return weights;
}

void ExportWeights(const ModelWeights& weights, const std::filesystem::path& path)
{
  const std::vector<std::uint8_t> bytes = EncodeWeights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw WeightFormatError(WeightErrorKind::kIo, "cannot write weight file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw WeightFormatError(WeightErrorKind::kIo, "short write to " + path.string());
}

ModelWeights ImportWeights(const std::filesystem::path& path) { return DecodeWeights(ReadFile(path)); }

void SaveCheckpoint(const ModelWeights& weights, const std::filesystem::path& path)
{
  nlohmann::json doc;
  doc["format"] = "gyrocal-checkpoint";
  doc["version"] = 1;
  doc["calib"] = Flatten(weights.calib);
  if (weights.denoise)
  {
    doc["denoise"] = Flatten(*weights.denoise);
    doc["window"] = weights.window;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw WeightFormatError(WeightErrorKind::kIo, "cannot write checkpoint " + path.string());
  out << doc.dump(2) << '\n';
}

ModelWeights LoadCheckpoint(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw WeightFormatError(WeightErrorKind::kIo, "cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try
  {
    in >> doc;
  }
  catch (const nlohmann::json::exception& e)
  {
    throw WeightFormatError(WeightErrorKind::kBadMagic,
                            "checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "gyrocal-checkpoint")
    throw WeightFormatError(WeightErrorKind::kBadMagic, "not a gyrocal checkpoint: " + path.string());
  if (doc.value("version", 0) != 1)
    throw WeightFormatError(WeightErrorKind::kVersionMismatch, "unsupported checkpoint version");

  auto read = [&](const char* key) {
    std::vector<double> v = doc.at(key).get<std::vector<double>>();
    for (double x : v)
      if (!std::isfinite(x))
        throw WeightFormatError(WeightErrorKind::kNonFinite, std::string("non-finite ") + key);
    return v;
  };

  ModelWeights weights;
  try
  {
    weights.calib = Unflatten<CalibNetParams, double>(read("calib"));
    if (doc.contains("denoise"))
    {
      weights.denoise = Unflatten<DenoiseNetParams, double>(read("denoise"));
      weights.window = doc.value("window", std::size_t{50});
    }
  }
  catch (const InvalidArgument& e)
  {
    throw WeightFormatError(WeightErrorKind::kLayoutMismatch, e.what());
  }
  catch (const nlohmann::json::exception& e)
  {
    throw WeightFormatError(WeightErrorKind::kLayoutMismatch, e.what());
  }
  return weights;
}

ModelWeights LoadAnyWeights(const std::filesystem::path& path)
{
  const std::vector<std::uint8_t> bytes = ReadFile(path);
  if (bytes.size() >= 4 && std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    return DecodeWeights(bytes);
  return LoadCheckpoint(path);
}

} // namespace gyrocal
