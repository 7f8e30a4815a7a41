/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

#include "gyrocal/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>

namespace gyrocal
{
namespace
{
std::string_view Trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitCsv(std::string_view line)
{
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true)
  {
    const std::size_t comma = line.find(',', begin);
    fields.push_back(Trim(line.substr(begin, comma == std::string_view::npos ? line.npos : comma - begin)));
    if (comma == std::string_view::npos)
      break;
    begin = comma + 1;
  }
  return fields;
}

std::string Where(const std::filesystem::path& path, std::size_t line)
{
  return path.string() + ":" + std::to_string(line);
}

double ParseDouble(std::string_view field, const std::filesystem::path& path, std::size_t line)
{
  double value = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw DataError(Where(path, line) + ": malformed number '" + std::string(field) + "'");
  if (!std::isfinite(value))
    throw DataError(Where(path, line) + ": non-finite value");
  return value;
}

std::int64_t ParseInt64(std::string_view field, const std::filesystem::path& path, std::size_t line)
{
  std::int64_t value = 0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty())
    throw DataError(Where(path, line) + ": malformed timestamp '" + std::string(field) + "'");
  return value;
}

// Calls `row(fields, line_number)` for each data line; '#' lines and blank
// lines are skipped. Returns the number of data rows.
template<typename F>
std::size_t ForEachCsvRow(const std::filesystem::path& path, bool skip_first_row, F&& row)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_number = 0;
  std::size_t rows = 0;
  bool first = true;
  while (std::getline(in, line))
  {
    ++line_number;
    std::string_view view = Trim(line);
    if (line_number == 1 && view.starts_with("\xEF\xBB\xBF"))
      view.remove_prefix(3);
    if (view.empty() || view.front() == '#')
      continue;
    if (first && skip_first_row)
    {
      first = false;
      continue;
    }
    first = false;
    row(SplitCsv(view), line_number);
    ++rows;
  }
  return rows;
}

std::filesystem::path FindEurocFile(const std::filesystem::path& directory, const char* sensor)
{
  for (const auto& base : {directory / "mav0", directory})
  {
    const auto candidate = base / sensor / "data.csv";
    if (std::filesystem::exists(candidate))
      return candidate;
  }
  throw DataError("EuRoC directory " + directory.string() + " has no " + sensor + "/data.csv");
}

Quat CheckedReference(double w, double x, double y, double z, const std::filesystem::path& path,
                      std::size_t line)
{
  const Quat q{w, x, y, z};
  const double norm = std::sqrt(SquaredNorm(q));
  if (std::abs(norm - 1.0) > kReferenceNormTolerance)
    throw DataError(Where(path, line) + ": reference quaternion norm " + std::to_string(norm) +
                    " is outside 1 +/- 1e-3");
  if (std::abs(norm - 1.0) > 1e-12)
    return Normalize(q);
  return q;
}

void RequireIncreasing(const std::vector<double>& t, const std::filesystem::path& path,
                       std::size_t line)
{
  const std::size_t n = t.size();
  if (n >= 2 && !(t[n - 1] > t[n - 2]))
    throw DataError(Where(path, line) + ": timestamps are not strictly increasing");
}

Vec3 MeanAccel(const GyroSequence& seq, double t_begin, double t_end)
{
  Vec3 sum{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (std::size_t k = 0; k < seq.size(); ++k)
  {
    if (seq.timestamps[k] < t_begin || seq.timestamps[k] > t_end)
      continue;
    for (int a = 0; a < 3; ++a)
      sum[a] += seq.accel[k][a];
    ++count;
  }
  if (count == 0)
    throw DataError("static window contains no accelerometer samples");
  for (double& v : sum)
    v /= static_cast<double>(count);
  return sum;
}

std::optional<std::size_t> NearestSample(const std::vector<double>& t, double target)
{
  if (t.size() < 2)
    return std::nullopt;
  const auto it = std::lower_bound(t.begin(), t.end(), target);
  std::size_t best;
  if (it == t.end())
    best = t.size() - 1;
  else if (it == t.begin())
    best = 0;
  else
  {
    const std::size_t hi = static_cast<std::size_t>(it - t.begin());
    best = (t[hi] - target) < (target - t[hi - 1]) ? hi : hi - 1;
  }
  const std::size_t nb = best == 0 ? 1 : best;
  const double half_period = 0.5 * (t[nb] - t[nb - 1]);
  if (std::abs(t[best] - target) > half_period)
    return std::nullopt;
  return best;
}
} // namespace

void GyroSequence::Validate() const
{
  if (timestamps.size() != samples.size())
    throw DataError("sequence has " + std::to_string(timestamps.size()) + " timestamps but " +
                    std::to_string(samples.size()) + " samples");
  if (!accel.empty() && accel.size() != samples.size())
    throw DataError("accelerometer column count does not match sample count");
  for (std::size_t k = 1; k < timestamps.size(); ++k)
    if (!(timestamps[k] > timestamps[k - 1]))
      throw DataError("timestamps are not strictly increasing at index " + std::to_string(k));
  for (std::size_t r = 1; r < references.size(); ++r)
    if (!(references[r].t > references[r - 1].t))
      throw DataError("reference timestamps are not strictly increasing");
}

void SegmentDataset::Append(SegmentDataset other)
{
  for (Segment& s : other.segments)
    segments.push_back(std::move(s));
}

GyroSequence LoadEuroc(const std::filesystem::path& directory)
{
  const auto imu_path = FindEurocFile(directory, "imu0");
  GyroSequence seq;
  std::int64_t origin_ns = 0;
  const std::size_t rows = ForEachCsvRow(imu_path, false, [&](const auto& f, std::size_t line) {
    if (f.size() < 7)
      throw DataError(Where(imu_path, line) + ": expected 7 columns, got " + std::to_string(f.size()));
    const std::int64_t ns = ParseInt64(f[0], imu_path, line);
    if (seq.timestamps.empty())
      origin_ns = ns;
    seq.timestamps.push_back(static_cast<double>(ns - origin_ns) * 1e-9);
    RequireIncreasing(seq.timestamps, imu_path, line);
    seq.samples.push_back({ParseDouble(f[1], imu_path, line), ParseDouble(f[2], imu_path, line),
                           ParseDouble(f[3], imu_path, line)});
    seq.accel.push_back({ParseDouble(f[4], imu_path, line), ParseDouble(f[5], imu_path, line),
                         ParseDouble(f[6], imu_path, line)});
  });
  if (rows == 0)
    throw DataError(imu_path.string() + " contains no samples");
  seq.time_origin_ns = origin_ns;
  seq.time_origin_s = static_cast<double>(origin_ns / 1000000000) +
                      static_cast<double>(origin_ns % 1000000000) * 1e-9;
  seq.references = LoadEurocGroundTruth(directory, origin_ns);
  return seq;
}

std::vector<AttitudeReference> LoadEurocGroundTruth(const std::filesystem::path& directory,
                                                    std::int64_t time_origin_ns)
{
  const auto gt_path = FindEurocFile(directory, "state_groundtruth_estimate0");
  std::vector<AttitudeReference> refs;
  std::vector<double> t;
  ForEachCsvRow(gt_path, false, [&](const auto& f, std::size_t line) {
    if (f.size() < 8)
      throw DataError(Where(gt_path, line) + ": expected at least 8 columns");
    const std::int64_t ns = ParseInt64(f[0], gt_path, line);
    t.push_back(static_cast<double>(ns - time_origin_ns) * 1e-9);
    RequireIncreasing(t, gt_path, line);
    refs.push_back({t.back(),
                    CheckedReference(ParseDouble(f[4], gt_path, line), ParseDouble(f[5], gt_path, line),
                                     ParseDouble(f[6], gt_path, line), ParseDouble(f[7], gt_path, line),
                                     gt_path, line),
                    true});
  });
  if (refs.empty())
    throw DataError(gt_path.string() + " contains no ground-truth rows");
  return refs;
}

GyroSequence LoadTurntableLog(const std::filesystem::path& path, const TurntableLoadOptions& options)
{
  std::ifstream probe(path);
  if (!probe)
    throw DataError("cannot open " + path.string());

  int col_t = -1, col_g = -1, col_a = -1, col_ref = -1;
  std::size_t columns = 0;
  bool have_header = false;
  GyroSequence seq;

  ForEachCsvRow(path, false, [&](const auto& f, std::size_t line) {
    if (!have_header)
    {
      have_header = true;
      columns = f.size();
      for (std::size_t i = 0; i < f.size(); ++i)
      {
        const auto name = f[i];
        if (name == "t_s")
          col_t = static_cast<int>(i);
        else if (name == "gx")
          col_g = static_cast<int>(i);
        else if (name == "ax")
          col_a = static_cast<int>(i);
        else if (name == "ref_qw")
          col_ref = static_cast<int>(i);
      }
      auto expect = [&](int base, std::initializer_list<const char*> names) {
        int offset = 0;
        for (const char* n : names)
        {
          if (base + offset >= static_cast<int>(f.size()) || f[base + offset] != n)
            throw DataError(Where(path, line) + ": header column '" + n + "' missing or out of order");
          ++offset;
        }
      };
      if (col_t < 0 || col_g < 0)
        throw DataError(Where(path, line) + ": header must start with t_s,gx,gy,gz");
      expect(col_g, {"gx", "gy", "gz"});
      if (col_a >= 0)
        expect(col_a, {"ax", "ay", "az"});
      if (col_ref >= 0)
        expect(col_ref, {"ref_qw", "ref_qx", "ref_qy", "ref_qz"});
      return;
    }

    if (f.size() != columns)
      throw DataError(Where(path, line) + ": expected " + std::to_string(columns) + " columns, got " +
                      std::to_string(f.size()));
    seq.timestamps.push_back(ParseDouble(f[col_t], path, line));
    RequireIncreasing(seq.timestamps, path, line);
    seq.samples.push_back({ParseDouble(f[col_g], path, line), ParseDouble(f[col_g + 1], path, line),
                           ParseDouble(f[col_g + 2], path, line)});
    if (col_a >= 0)
      seq.accel.push_back({ParseDouble(f[col_a], path, line), ParseDouble(f[col_a + 1], path, line),
                           ParseDouble(f[col_a + 2], path, line)});
    if (col_ref >= 0)
    {
      const bool any = !f[col_ref].empty() || !f[col_ref + 1].empty() || !f[col_ref + 2].empty() ||
                       !f[col_ref + 3].empty();
      if (any)
        seq.references.push_back(
            {seq.timestamps.back(),
             CheckedReference(ParseDouble(f[col_ref], path, line), ParseDouble(f[col_ref + 1], path, line),
                              ParseDouble(f[col_ref + 2], path, line),
                              ParseDouble(f[col_ref + 3], path, line), path, line),
             true});
    }
  });

  if (!have_header)
    throw DataError(path.string() + " is empty");
  if (seq.samples.empty())
    throw DataError(path.string() + " contains a header but no samples");

  if (options.references_from_gravity && col_ref < 0 && col_a >= 0)
  {
    const double t0 = seq.timestamps.front();
    const double t1 = seq.timestamps.back();
    const double w = options.static_window_s;
    if (t1 - t0 < 2.0 * w)
      throw DataError(path.string() + ": log is shorter than two static windows");
    auto nearest = [&](double target) {
      const auto k = NearestSample(seq.timestamps, target);
      return k ? seq.timestamps[*k] : target;
    };
    AttitudeReference first{nearest(t0 + 0.5 * w), QuatFromGravity(MeanAccel(seq, t0, t0 + w)), true};
    AttitudeReference last{nearest(t1 - 0.5 * w), QuatFromGravity(MeanAccel(seq, t1 - w, t1)), false};
    seq.references = {first, last};
  }
  return seq;
}

std::string FormatDouble(double v)
{
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  if (ec != std::errc())
    throw NumericError("cannot format number");
  return std::string(buffer, ptr);
}

void WriteTurntableLog(const GyroSequence& seq, const std::filesystem::path& path)
{
  seq.Validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw DataError("cannot write " + path.string());
  const bool has_accel = !seq.accel.empty();
  const bool has_ref = !seq.references.empty();
  out << "t_s,gx,gy,gz";
  if (has_accel)
    out << ",ax,ay,az";
  if (has_ref)
    out << ",ref_qw,ref_qx,ref_qy,ref_qz";
  out << '\n';

  std::size_t next_ref = 0;
  for (std::size_t k = 0; k < seq.size(); ++k)
  {
    const double t = seq.timestamps[k];
    out << FormatDouble(t);
    for (double v : seq.samples[k])
      out << ',' << FormatDouble(v);
    if (has_accel)
      for (double v : seq.accel[k])
        out << ',' << FormatDouble(v);
    if (has_ref)
    {
      if (next_ref < seq.references.size() && seq.references[next_ref].t == t)
      {
        const Quat& q = seq.references[next_ref].q;
        out << ',' << FormatDouble(q.w) << ',' << FormatDouble(q.x) << ',' << FormatDouble(q.y) << ','
            << FormatDouble(q.z);
        ++next_ref;
      }
      else
      {
        out << ",,,,";
      }
    }
    out << '\n';
  }
  if (next_ref != seq.references.size())
    throw DataError("reference timestamps must coincide with sample timestamps to be written");
}

void WriteAttitudeTrack(std::span<const double> t, std::span<const Quat> q,
                        const std::filesystem::path& path)
{
  if (t.size() != q.size())
    throw InvalidArgument("WriteAttitudeTrack: length mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw DataError("cannot write " + path.string());
  out << "t,qw,qx,qy,qz\n";
  for (std::size_t k = 0; k < t.size(); ++k)
    out << FormatDouble(t[k]) << ',' << FormatDouble(q[k].w) << ',' << FormatDouble(q[k].x) << ','
        << FormatDouble(q[k].y) << ',' << FormatDouble(q[k].z) << '\n';
}

std::vector<AttitudeReference> LoadAttitudeTrack(const std::filesystem::path& path)
{
  std::vector<AttitudeReference> refs;
  std::vector<double> t;
  const std::size_t rows = ForEachCsvRow(path, true, [&](const auto& f, std::size_t line) {
    if (f.size() != 5)
      throw DataError(Where(path, line) + ": attitude track rows need t,qw,qx,qy,qz");
    t.push_back(ParseDouble(f[0], path, line));
    RequireIncreasing(t, path, line);
    refs.push_back({t.back(),
                    CheckedReference(ParseDouble(f[1], path, line), ParseDouble(f[2], path, line),
                                     ParseDouble(f[3], path, line), ParseDouble(f[4], path, line), path,
                                     line),
                    true});
  });
  if (rows == 0)
    throw DataError(path.string() + " contains no attitude rows");
  return refs;
}

Quat AlignReference(std::span<const AttitudeReference> references, double t)
{
  if (references.empty())
    throw DataError("no reference attitudes to align against");
  if (t < references.front().t || t > references.back().t)
    throw DataError("reference requested at t=" + FormatDouble(t) + " outside the span [" +
                    FormatDouble(references.front().t) + ", " + FormatDouble(references.back().t) + "]");
  const auto it = std::lower_bound(references.begin(), references.end(), t,
                                   [](const AttitudeReference& r, double v) { return r.t < v; });
  if (it->t == t)
    return it->q;
  const AttitudeReference& hi = *it;
  const AttitudeReference& lo = *(it - 1);
  const double u = (t - lo.t) / (hi.t - lo.t);
  return Slerp(lo.q, hi.q, u);
}

std::vector<Quat> AlignReference(const GyroSequence& seq, std::span<const double> targets)
{
  std::vector<Quat> out;
  out.reserve(targets.size());
  for (double t : targets)
    out.push_back(AlignReference(seq.references, t));
  return out;
}

namespace
{
bool YawObservableAt(std::span<const AttitudeReference> refs, double t)
{
  const auto it = std::lower_bound(refs.begin(), refs.end(), t,
                                   [](const AttitudeReference& r, double v) { return r.t < v; });
  if (it == refs.end())
    return refs.back().yaw_observable;
  if (it->t == t || it == refs.begin())
    return it->yaw_observable;
  return it->yaw_observable && (it - 1)->yaw_observable;
}

Segment MakeSegment(const GyroSequence& seq, std::size_t begin, std::size_t end_inclusive,
                    std::size_t start_index, const Quat& q_start, const Quat& q_end, bool yaw_observable)
{
  Segment s;
  s.timestamps.assign(seq.timestamps.begin() + begin, seq.timestamps.begin() + end_inclusive + 1);
  s.raw.assign(seq.samples.begin() + begin, seq.samples.begin() + end_inclusive + 1);
  s.start_index = start_index;
  s.q_start = q_start;
  s.q_end = q_end;
  s.end_yaw_observable = yaw_observable;
  return s;
}
} // namespace

SegmentationResult SegmentSequence(const GyroSequence& seq, std::size_t m, std::size_t n)
{
  if (n == 0 || m == 0 || n > m)
    throw InvalidArgument("SegmentSequence: requires 1 <= n <= m");
  seq.Validate();
  SegmentationResult result;
  const std::size_t count = seq.size() / m;
  if (count == 0)
  {
    result.warnings.push_back("sequence of " + std::to_string(seq.size()) +
                              " samples is shorter than one segment (m = " + std::to_string(m) + ")");
    return result;
  }
  if (seq.size() % m != 0)
    result.warnings.push_back("dropped " + std::to_string(seq.size() % m) + " trailing samples");

  for (std::size_t j = 0; j < count; ++j)
  {
    const std::size_t base = j * m;
    const double t_start = seq.timestamps[base + n - 1];
    const double t_end = seq.timestamps[base + m - 1];
    if (seq.references.empty() || t_start < seq.references.front().t || t_end > seq.references.back().t)
    {
      result.warnings.push_back("segment " + std::to_string(j) +
                                ": reference attitudes do not cover its boundaries");
      continue;
    }
    result.dataset.segments.push_back(
        MakeSegment(seq, base, base + m - 1, n - 1, AlignReference(seq.references, t_start),
                    AlignReference(seq.references, t_end), YawObservableAt(seq.references, t_end)));
  }
  return result;
}

SegmentationResult SegmentByReferences(const GyroSequence& seq, std::size_t n)
{
  if (n == 0)
    throw InvalidArgument("SegmentByReferences: n must be at least 1");
  seq.Validate();
  SegmentationResult result;
  if (seq.references.size() < 2)
  {
    result.warnings.push_back("fewer than two reference attitudes; no segments");
    return result;
  }
  for (std::size_t r = 0; r + 1 < seq.references.size(); ++r)
  {
    const auto& a = seq.references[r];
    const auto& b = seq.references[r + 1];
    const auto ia = NearestSample(seq.timestamps, a.t);
    const auto ib = NearestSample(seq.timestamps, b.t);
    if (!ia || !ib)
    {
      result.warnings.push_back("reference pair " + std::to_string(r) +
                                ": reference not within half a sample period of a sample");
      continue;
    }
    if (*ia + 1 < n)
    {
      result.warnings.push_back("reference pair " + std::to_string(r) + ": fewer than n - 1 = " +
                                std::to_string(n - 1) + " samples precede the first reference");
      continue;
    }
    if (*ib <= *ia)
      continue;
    result.dataset.segments.push_back(
        MakeSegment(seq, *ia + 1 - n, *ib, n - 1, a.q, b.q, b.yaw_observable));
  }
  return result;
}

} // namespace gyrocal
