/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

// gyrocal: simulate, train, apply, eval and export from the command line.
//
// Exit status: 0 success, 2 usage error, 3 data error, 4 numeric failure.
// Every command writes a key=value run manifest next to its outputs.

#include "gyrocal/data_io.hpp"
#include "gyrocal/errors.hpp"
#include "gyrocal/metrics.hpp"
#include "gyrocal/net.hpp"
#include "gyrocal/sim.hpp"
#include "gyrocal/train.hpp"
#include "gyrocal/weights.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace gyrocal;

namespace
{
constexpr const char* kArtifactVersion = "gyrocal 0.1.0";

enum ExitCode
{
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

std::string Sha256File(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buffer[1 << 16];
  while (in)
  {
    in.read(buffer, sizeof(buffer));
    EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i)
  {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

// Regular files under `path` (or the file itself), sorted, for digests.
std::vector<fs::path> InputFiles(const fs::path& path)
{
  std::vector<fs::path> out;
  if (fs::is_regular_file(path))
    out.push_back(path);
  else if (fs::is_directory(path))
    for (const auto& entry : fs::recursive_directory_iterator(path))
      if (entry.is_regular_file())
        out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Fills options not given on the command line from "key=value" lines.
// Blank lines and lines starting with '#' are skipped.
void ApplyConfig(CLI::App& sub, const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    const auto last_key = line.find_last_not_of(" \t", eq - 1);
    const std::string key = line.substr(first, last_key == std::string::npos ? 0 : last_key + 1 - first);
    const auto value_begin = line.find_first_not_of(" \t", eq + 1);
    const auto value_end = line.find_last_not_of(" \t\r");
    const std::string value =
        value_begin == std::string::npos ? "" : line.substr(value_begin, value_end + 1 - value_begin);
    if (key == "config")
      throw UsageError(path.string() + ": config files cannot include other config files");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": unknown option '" + key + "'");
    if (opt->count() > 0)
      continue;
    try
    {
      opt->add_result(value);
      opt->run_callback();
    }
    catch (const CLI::ParseError& e)
    {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

class Manifest
{
public:
  Manifest(std::string command, const CLI::App& sub, std::uint64_t seed)
      : m_start(std::chrono::steady_clock::now())
  {
    Set("command", std::move(command));
    Set("artifact_version", kArtifactVersion);
    Set("seed", std::to_string(seed));
    std::istringstream config(sub.config_to_str(true, false));
    std::string line;
    while (std::getline(config, line))
    {
      const auto eq = line.find('=');
      if (line.empty() || line[0] == '[' || line[0] == '#' || eq == std::string::npos)
        continue;
      std::string key = line.substr(0, line.find_last_not_of(' ', eq - 1) + 1);
      std::string value = line.substr(line.find_first_not_of(' ', eq + 1));
      Set("config." + key, value);
    }
  }

  void Set(const std::string& key, std::string value) { m_entries.emplace_back(key, std::move(value)); }
  void Set(const std::string& key, double value) { Set(key, FormatDouble(value)); }

  void AddInput(const fs::path& path)
  {
    for (const fs::path& file : InputFiles(path))
      Set("input." + file.string(), "sha256:" + Sha256File(file));
  }

  void AddOutput(const fs::path& path) { Set("output." + std::to_string(m_outputs++), path.string()); }

  void Write(const fs::path& path)
  {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - m_start).count();
    Set("wall_clock_s", wall);
    std::ofstream out(path, std::ios::trunc);
    if (!out)
      throw DataError("cannot write " + path.string());
    for (const auto& [k, v] : m_entries)
      out << k << '=' << v << '\n';
  }

private:
  std::chrono::steady_clock::time_point m_start;
  std::vector<std::pair<std::string, std::string>> m_entries;
  std::size_t m_outputs = 0;
};

void RequireWritable(const fs::path& path, bool force)
{
  if (fs::exists(path) && !force)
    throw UsageError(path.string() + " already exists (pass --force to overwrite)");
}

void RequireDistinct(const fs::path& input, const fs::path& output)
{
  std::error_code ec;
  if (fs::exists(output) && fs::equivalent(input, output, ec))
    throw UsageError("output " + output.string() + " would overwrite the input");
}

void EnsureParent(const fs::path& file)
{
  if (file.has_parent_path())
    fs::create_directories(file.parent_path());
}

fs::path ManifestFor(const fs::path& output_file) { return fs::path(output_file.string() + ".manifest.txt"); }

void WriteLossTrace(const std::vector<double>& trace, const fs::path& path)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw DataError("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e)
    out << e << ',' << FormatDouble(trace[e]) << '\n';
}

// Turntable logs in a directory: every *.csv directly inside it, by name.
std::vector<fs::path> TurntableFiles(const fs::path& data)
{
  if (fs::is_regular_file(data))
    return {data};
  if (!fs::is_directory(data))
    throw DataError("data path " + data.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(data))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw DataError("no .csv logs in " + data.string());
  return files;
}

bool IsEurocSequence(const fs::path& dir)
{
  return fs::exists(dir / "mav0" / "imu0" / "data.csv") || fs::exists(dir / "imu0" / "data.csv");
}

std::vector<fs::path> EurocSequences(const fs::path& data)
{
  if (IsEurocSequence(data))
    return {data};
  std::vector<fs::path> dirs;
  if (fs::is_directory(data))
    for (const auto& entry : fs::directory_iterator(data))
      if (entry.is_directory() && IsEurocSequence(entry.path()))
        dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw DataError("no EuRoC sequences (mav0/imu0/data.csv) under " + data.string());
  return dirs;
}

GyroSequence LoadEurocWithTruth(const fs::path& dir)
{
  GyroSequence seq = LoadEuroc(dir);
  seq.references = LoadEurocGroundTruth(dir, seq.time_origin_ns);
  return seq;
}

SegmentDataset LoadDataset(const fs::path& data, const std::string& format, std::size_t m, std::size_t n,
                           bool gravity_refs)
{
  SegmentDataset dataset;
  auto take = [&](SegmentationResult r, const fs::path& source) {
    for (const std::string& w : r.warnings)
      std::cerr << "warning: " << source.string() << ": " << w << '\n';
    dataset.Append(std::move(r.dataset));
  };
  if (format == "euroc")
  {
    for (const fs::path& dir : EurocSequences(data))
      take(SegmentSequence(LoadEurocWithTruth(dir), m, n), dir);
  }
  else
  {
    TurntableLoadOptions options;
    options.references_from_gravity = gravity_refs;
    for (const fs::path& file : TurntableFiles(data))
    {
      const GyroSequence seq = LoadTurntableLog(file, options);
      if (seq.references.size() < 2)
        throw DataError(file.string() + " has fewer than two reference attitudes");
      take(SegmentByReferences(seq, n), file);
    }
  }
  if (dataset.empty())
    throw DataError("no training segments with references could be formed from " + data.string());
  return dataset;
}

std::vector<double> Column(std::span<const Vec3> v, int axis)
{
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] = v[k][axis];
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs
{
  std::uint64_t seed = 0;
  std::size_t segments = 40;
  double rate = 200.0;
  std::string profile = "random-smooth";
  double scale_err = 0.05;
  double misalign_deg = 2.0;
  double bias = 0.02;
  double noise = kDefaultNoiseSigma;
  double static_seconds = 1.0;
  double motion_seconds = 3.0;
  std::string distortion_from;
  std::string out;
  bool force = false;
};

nlohmann::json DistortionJson(const DistortionGroundTruth& d)
{
  return {{"E", d.e}, {"B", d.b}, {"noise_sigma", d.noise_sigma}};
}

DistortionGroundTruth DistortionFromJson(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot read " + path.string());
  nlohmann::json j;
  try
  {
    in >> j;
    const auto& d = j.contains("distortion") ? j.at("distortion") : j;
    DistortionGroundTruth out;
    out.e = d.at("E").get<Mat3>();
    out.b = d.at("B").get<Vec3>();
    out.noise_sigma = d.at("noise_sigma").get<double>();
    return out;
  }
  catch (const nlohmann::json::exception& e)
  {
    throw DataError(path.string() + ": " + e.what());
  }
}

int RunSimulate(const SimulateArgs& a, const CLI::App& sub)
{
  if (a.out.empty())
    throw UsageError("--out is required");
  if (a.segments == 0)
    throw UsageError("--segments must be at least 1");
  if (!(a.rate > 0.0))
    throw UsageError("--rate must be positive");
  if (a.scale_err < 0.0 || a.misalign_deg < 0.0 || a.bias < 0.0 || a.noise < 0.0)
    throw UsageError("--scale-err, --misalign-deg, --bias and --noise must be non-negative");
  if (!(a.static_seconds > 0.0) || !(a.motion_seconds > 0.0))
    throw UsageError("--static-seconds and --motion-seconds must be positive");
  MotionKind motion;
  try
  {
    motion = ParseMotionKind(a.profile);
  }
  catch (const InvalidArgument& e)
  {
    throw UsageError(e.what());
  }

  const fs::path out(a.out);
  const fs::path truth_dir = out / "truth";
  const fs::path sidecar = truth_dir / "truth.json";
  const fs::path manifest_path = out / "run_manifest.txt";
  RequireWritable(sidecar, a.force);
  RequireWritable(manifest_path, a.force);

  DistortionGroundTruth d;
  if (!a.distortion_from.empty())
  {
    d = DistortionFromJson(a.distortion_from);
    d.noise_sigma = a.noise;
  }
  else
  {
    d = SampleDistortion(a.seed, {a.scale_err, a.misalign_deg, a.bias, a.noise});
  }

  TurntableOptions options;
  options.rate_hz = a.rate;
  options.static_s = a.static_seconds;
  options.motion_s = a.motion_seconds;
  options.motion = motion;
  const TurntableSession session = GenTurntableSession(a.seed, d, a.segments, options);

  fs::create_directories(truth_dir);
  Manifest manifest("simulate", sub, a.seed);
  if (!a.distortion_from.empty())
    manifest.AddInput(a.distortion_from);
  nlohmann::json sidecar_json;
  sidecar_json["seed"] = a.seed;
  sidecar_json["rate_hz"] = a.rate;
  sidecar_json["profile"] = MotionKindName(motion);
  sidecar_json["distortion"] = DistortionJson(d);
  sidecar_json["condition_number"] = ConditionNumber(d.e);
  sidecar_json["segments"] = nlohmann::json::array();

  char name[64];
  for (std::size_t j = 0; j < session.segments.size(); ++j)
  {
    const TurntableSegment& s = session.segments[j];
    std::snprintf(name, sizeof(name), "segment_%03zu", j);
    const fs::path log = out / (std::string(name) + ".csv");
    const fs::path attitude = truth_dir / (std::string(name) + "_truth.csv");
    const fs::path rates = truth_dir / (std::string(name) + "_rates.csv");
    for (const fs::path& p : {log, attitude, rates})
      RequireWritable(p, a.force);
    WriteTurntableLog(s.log, log);
    WriteAttitudeTrack(s.truth.timestamps, s.truth.attitudes, attitude);
    GyroSequence truth_rates;
    truth_rates.timestamps = s.truth.timestamps;
    truth_rates.samples = s.truth.rates;
    WriteTurntableLog(truth_rates, rates);
    for (const fs::path& p : {log, attitude, rates})
      manifest.AddOutput(p);
    sidecar_json["segments"].push_back({{"log", log.filename().string()},
                                        {"truth_attitude", attitude.filename().string()},
                                        {"truth_rates", rates.filename().string()},
                                        {"samples", s.log.size()}});
  }
  {
    std::ofstream js(sidecar, std::ios::trunc);
    if (!js)
      throw DataError("cannot write " + sidecar.string());
    js << sidecar_json.dump(2) << '\n';
  }
  manifest.AddOutput(sidecar);
  manifest.Set("condition_number", ConditionNumber(d.e));
  manifest.Write(manifest_path);
  std::cout << "wrote " << session.segments.size() << " segment logs to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs
{
  std::string phase = "calib";
  std::string data;
  std::string format = "turntable";
  std::size_t epochs = 2000;
  double lr = 0.01;
  double wd = 0.0;
  std::size_t n = 50;
  std::size_t m = 400;
  std::uint64_t seed = 0;
  std::string weights_in;
  std::string weights_out;
  std::string trace;
  bool gravity_refs = false;
  bool keep_last = false;
  bool force = false;
  bool quiet = false;
};

void SaveWeights(const ModelWeights& w, const fs::path& path)
{
  if (path.extension() == ".tgcn")
    ExportWeights(w, path);
  else
    SaveCheckpoint(w, path);
}

int RunTrain(const TrainArgs& a, const CLI::App& sub)
{
  if (a.phase != "calib" && a.phase != "denoise")
    throw UsageError("--phase must be calib or denoise");
  if (a.format != "turntable" && a.format != "euroc")
    throw UsageError("--format must be turntable or euroc");
  if (a.data.empty() || a.weights_out.empty())
    throw UsageError("--data and --weights-out are required");
  if (a.epochs == 0)
    throw UsageError("--epochs must be at least 1");
  if (!(a.lr > 0.0) || a.wd < 0.0)
    throw UsageError("--lr must be positive and --wd non-negative");
  if (a.n == 0 || a.n > a.m)
    throw UsageError("--n must satisfy 1 <= n <= m");
  const bool denoise = a.phase == "denoise";
  if (denoise && a.weights_in.empty())
    throw UsageError("--phase denoise requires --weights-in with trained calibration weights: the "
                     "calibration subnet is trained first (phase calib) and then frozen");
  if (denoise && a.n < DenoiseNetParams::kReceptiveField)
    throw UsageError("--n must be at least the denoiser receptive field (" +
                     std::to_string(DenoiseNetParams::kReceptiveField) + ")");

  const fs::path weights_out(a.weights_out);
  const fs::path trace_path = a.trace.empty() ? fs::path(a.weights_out + ".loss.csv") : fs::path(a.trace);
  const fs::path manifest_path = ManifestFor(weights_out);
  for (const fs::path& p : {weights_out, trace_path, manifest_path})
    RequireWritable(p, a.force);
  if (!a.weights_in.empty())
    RequireDistinct(a.weights_in, weights_out);

  Manifest manifest("train", sub, a.seed);
  manifest.AddInput(a.data);
  ModelWeights weights;
  if (!a.weights_in.empty())
  {
    weights = LoadAnyWeights(a.weights_in);
    manifest.AddInput(a.weights_in);
  }

  const std::size_t n = denoise ? a.n : 1; // phase 1 trains with N = 1
  const SegmentDataset data = LoadDataset(a.data, a.format, a.m, n, a.gravity_refs);

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.wd;
  cfg.window = n;
  cfg.segment_length = a.m;
  cfg.seed = a.seed;
  cfg.keep_best = !a.keep_last;
  cfg.phase = denoise ? TrainPhase::kDenoiser : TrainPhase::kCalibration;
  const std::size_t every = std::max<std::size_t>(1, a.epochs / 20);
  cfg.on_epoch = [&](std::size_t epoch, double loss) {
    if (!a.quiet && (epoch % every == 0 || epoch + 1 == a.epochs))
      std::cout << "epoch " << epoch << " loss " << loss << '\n';
  };

  EnsureParent(weights_out);
  EnsureParent(trace_path);
  TrainResult result;
  try
  {
    if (denoise)
    {
      // A prior denoiser in --weights-in is the starting point.
      result = TrainDenoiser(weights.calib, data, cfg, weights.denoise);
    }
    else
    {
      result = TrainCalibration(data, cfg, weights.calib);
    }
  }
  catch (const DivergenceError& e)
  {
    WriteLossTrace(e.trace(), trace_path);
    throw;
  }

  ModelWeights out_weights;
  out_weights.calib = result.calib;
  out_weights.denoise = denoise ? result.denoise : weights.denoise;
  out_weights.window = denoise ? a.n : weights.window;
  SaveWeights(out_weights, weights_out);
  WriteLossTrace(result.loss_trace, trace_path);

  manifest.AddOutput(weights_out);
  manifest.AddOutput(trace_path);
  manifest.Set("segments", std::to_string(data.size()));
  manifest.Set("initial_loss", result.loss_trace.front());
  manifest.Set("final_loss", result.final_loss);
  manifest.Set("selected_epoch", std::to_string(result.selected_epoch));
  manifest.Set("param_count.calib", std::to_string(ParamCount(out_weights.calib)));
  manifest.Set("param_count.denoise",
               std::to_string(out_weights.denoise ? ParamCount(*out_weights.denoise) : 0));
  manifest.Set("param_count.total",
               std::to_string(out_weights.denoise ? ParamCount(out_weights.calib, *out_weights.denoise)
                                                  : ParamCount(out_weights.calib)));
  manifest.Write(manifest_path);
  std::cout << "trained " << data.size() << " segments, final loss " << result.final_loss << ", wrote "
            << weights_out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- apply

struct ApplyArgs
{
  std::string weights;
  std::string data;
  std::string stage = "calib";
  std::string out;
  std::size_t n = 0; // 0: use the window stored with the weights
  bool force = false;
};

int RunApply(const ApplyArgs& a, const CLI::App& sub)
{
  if (a.weights.empty() || a.data.empty() || a.out.empty())
    throw UsageError("--weights, --data and --out are required");
  if (a.stage != "calib" && a.stage != "calib+denoise")
    throw UsageError("--stage must be calib or calib+denoise");
  const fs::path out(a.out);
  RequireWritable(out, a.force);
  RequireWritable(ManifestFor(out), a.force);
  RequireDistinct(a.data, out);

  const ModelWeights w = LoadAnyWeights(a.weights);
  const bool denoise = a.stage == "calib+denoise";
  if (denoise && !w.denoise)
    throw DataError(a.weights + " holds no denoiser; stage calib+denoise needs phase-2 weights");
  const std::size_t window = a.n != 0 ? a.n : w.window;

  GyroSequence seq = fs::is_directory(a.data) ? LoadEuroc(a.data) : LoadTurntableLog(a.data);
  std::vector<Vec3> rates = CalibrateSequence(w.calib, seq.samples);
  if (denoise)
  {
    if (rates.size() < window)
      throw DataError("sequence has " + std::to_string(rates.size()) + " samples, fewer than the window " +
                      std::to_string(window));
    rates = DenoiseSequence(*w.denoise, rates, window);
  }
  seq.samples = std::move(rates);
  EnsureParent(out);
  WriteTurntableLog(seq, out);

  Manifest manifest("apply", sub, 0);
  manifest.AddInput(a.weights);
  manifest.AddInput(a.data);
  manifest.AddOutput(out);
  manifest.Set("window", std::to_string(window));
  manifest.Write(ManifestFor(out));
  std::cout << "wrote " << seq.size() << " corrected samples to " << out.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs
{
  std::string est;
  std::string truth;
  std::string before;
  std::string metric = "aoe";
  std::string out;
  double rate = 0.0; // 0: from the median sample interval
  double high_cutoff = 20.0;
  double low_cutoff = 5.0;
  bool force = false;
};

struct LoadedTrack
{
  bool is_rate_log = false;
  GyroSequence rates;                       // when is_rate_log
  std::vector<AttitudeReference> attitudes; // otherwise
};

bool HasHeader(const fs::path& path, const std::string& prefix)
{
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line.rfind(prefix, 0) == 0;
}

LoadedTrack LoadEstimate(const fs::path& path)
{
  LoadedTrack t;
  if (fs::is_directory(path))
  {
    t.is_rate_log = true;
    t.rates = LoadEuroc(path);
  }
  else if (HasHeader(path, "t_s,"))
  {
    t.is_rate_log = true;
    t.rates = LoadTurntableLog(path);
  }
  else
  {
    t.attitudes = LoadAttitudeTrack(path);
  }
  return t;
}

std::vector<AttitudeReference> LoadTruth(const fs::path& path)
{
  if (fs::is_directory(path))
  {
    const GyroSequence seq = LoadEurocWithTruth(path);
    return seq.references;
  }
  if (HasHeader(path, "t_s,"))
    return LoadTurntableLog(path).references;
  return LoadAttitudeTrack(path);
}

double InferRate(std::span<const double> t)
{
  if (t.size() < 2)
    throw DataError("cannot infer a sample rate from fewer than two samples");
  std::vector<double> dt(t.size() - 1);
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    dt[k] = t[k + 1] - t[k];
  std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
  return 1.0 / dt[dt.size() / 2];
}

using MetricList = std::vector<std::pair<std::string, double>>;

void PrintMetrics(const MetricList& metrics)
{
  for (const auto& [k, v] : metrics)
    std::cout << k << " = " << v << '\n';
}

int RunEval(const EvalArgs& a, const CLI::App& sub)
{
  if (a.metric != "aoe" && a.metric != "endpoint" && a.metric != "spectrum")
    throw UsageError("--metric must be aoe, endpoint or spectrum");
  if (a.est.empty() || a.out.empty())
    throw UsageError("--est and --out are required");
  if (a.metric != "spectrum" && a.truth.empty())
    throw UsageError("--metric " + a.metric + " requires --truth");

  const fs::path out(a.out);
  const fs::path metrics_path = out / (a.metric + "_metrics.csv");
  const fs::path manifest_path = out / (a.metric + "_manifest.txt");
  RequireWritable(metrics_path, a.force);
  RequireWritable(manifest_path, a.force);
  fs::create_directories(out);

  Manifest manifest("eval", sub, 0);
  manifest.AddInput(a.est);
  if (!a.truth.empty())
    manifest.AddInput(a.truth);
  MetricList metrics;

  if (a.metric == "spectrum")
  {
    const LoadedTrack est = LoadEstimate(a.est);
    if (!est.is_rate_log)
      throw DataError("--metric spectrum needs a rate log for --est");
    const std::string before_path = !a.before.empty() ? a.before : a.truth;
    std::optional<GyroSequence> before;
    if (!before_path.empty())
    {
      before = fs::is_directory(before_path) ? LoadEuroc(before_path) : LoadTurntableLog(before_path);
      manifest.AddInput(before_path);
      if (before->size() != est.rates.size())
        throw DataError("before and after sequences differ in length");
    }
    const double rate = a.rate > 0.0 ? a.rate : InferRate(est.rates.timestamps);
    const char* axes[] = {"x", "y", "z"};
    for (int axis = 0; axis < 3; ++axis)
    {
      const std::vector<double> after = Column(est.rates.samples, axis);
      const fs::path after_csv = out / (std::string("spectrum_after_") + axes[axis] + ".csv");
      RequireWritable(after_csv, a.force);
      if (before)
      {
        const std::vector<double> prior = Column(before->samples, axis);
        const DenoiseReport r = MakeDenoiseReport(prior, after, rate, {a.high_cutoff, a.low_cutoff});
        const fs::path before_csv = out / (std::string("spectrum_before_") + axes[axis] + ".csv");
        RequireWritable(before_csv, a.force);
        WriteSpectrumCsv(r.before, before_csv);
        WriteSpectrumCsv(r.after, after_csv);
        manifest.AddOutput(before_csv);
        metrics.emplace_back(std::string("high_band_power_ratio_") + axes[axis], r.high_band_power_ratio);
        metrics.emplace_back(std::string("low_band_amplitude_ratio_") + axes[axis],
                             r.low_band_amplitude_ratio);
      }
      else
      {
        WriteSpectrumCsv(PowerSpectrum(after, rate), after_csv);
      }
      manifest.AddOutput(after_csv);
    }
    if (before)
    {
      const fs::path series = out / "series.csv";
      RequireWritable(series, a.force);
      std::ofstream s(series, std::ios::trunc);
      s << "t,before_x,before_y,before_z,after_x,after_y,after_z\n";
      for (std::size_t k = 0; k < est.rates.size(); ++k)
      {
        s << FormatDouble(est.rates.timestamps[k]);
        for (double v : before->samples[k])
          s << ',' << FormatDouble(v);
        for (double v : est.rates.samples[k])
          s << ',' << FormatDouble(v);
        s << '\n';
      }
      manifest.AddOutput(series);
    }
    metrics.emplace_back("rate_hz", rate);
  }
  else
  {
    const LoadedTrack est = LoadEstimate(a.est);
    const std::vector<AttitudeReference> truth = LoadTruth(a.truth);
    if (truth.size() < 2)
      throw DataError(a.truth + " provides fewer than two truth attitudes");
    const double t_first = truth.front().t;
    const double t_last = truth.back().t;

    if (a.metric == "aoe")
    {
      AttitudeTrack estimate;
      if (est.is_rate_log)
      {
        // Open loop from the truth attitude at the first covered sample.
        std::vector<double> ts;
        std::vector<Vec3> omega;
        for (std::size_t k = 0; k < est.rates.size(); ++k)
          if (est.rates.timestamps[k] >= t_first && est.rates.timestamps[k] <= t_last)
          {
            ts.push_back(est.rates.timestamps[k]);
            omega.push_back(est.rates.samples[k]);
          }
        if (ts.size() < 2)
          throw DataError("estimate and truth do not overlap in time");
        estimate = IntegrateSequence(omega, AlignReference(truth, ts.front()), ts);
      }
      else
      {
        for (const AttitudeReference& r : est.attitudes)
          if (r.t >= t_first && r.t <= t_last)
          {
            estimate.timestamps.push_back(r.t);
            estimate.attitudes.push_back(r.q);
          }
        if (estimate.size() == 0)
          throw DataError("estimate and truth do not overlap in time");
      }
      AttitudeTrack truth_track;
      truth_track.timestamps = estimate.timestamps;
      for (double t : estimate.timestamps)
        truth_track.attitudes.push_back(AlignReference(truth, t));
      metrics.emplace_back("aoe_deg", Aoe(estimate, truth_track));
      metrics.emplace_back("samples", static_cast<double>(estimate.size()));
      metrics.emplace_back("duration_s", estimate.timestamps.back() - estimate.timestamps.front());
      const fs::path est_csv = out / "aoe_estimate_track.csv";
      const fs::path truth_csv = out / "aoe_truth_track.csv";
      RequireWritable(est_csv, a.force);
      RequireWritable(truth_csv, a.force);
      WriteEulerTrackCsv(estimate, est_csv);
      WriteEulerTrackCsv(truth_track, truth_csv);
      manifest.AddOutput(est_csv);
      manifest.AddOutput(truth_csv);
    }
    else
    {
      Quat estimate_end;
      const Quat reference_end = truth.back().q;
      if (est.is_rate_log)
      {
        // Integrate from the first reference to the last one.
        const auto& ts = est.rates.timestamps;
        const auto first = std::find(ts.begin(), ts.end(), t_first);
        const auto last = std::find(ts.begin(), ts.end(), t_last);
        if (first == ts.end() || last == ts.end())
          throw DataError("truth reference times must coincide with estimate sample times");
        const auto i0 = static_cast<std::size_t>(first - ts.begin());
        const auto i1 = static_cast<std::size_t>(last - ts.begin());
        const std::span<const Vec3> omega(est.rates.samples.data() + i0, i1 - i0 + 1);
        const std::span<const double> t(ts.data() + i0, i1 - i0 + 1);
        estimate_end = IntegrateSequence(omega, truth.front().q, t).attitudes.back();
      }
      else
      {
        estimate_end = AlignReference(est.attitudes, t_last);
      }
      const EndpointReport r = EndpointError(estimate_end, reference_end);
      metrics = {{"roll_deg", r.roll_deg},
                 {"pitch_deg", r.pitch_deg},
                 {"yaw_deg", r.yaw_deg},
                 {"rmse_deg", r.rmse_deg},
                 {"near_gimbal_lock", r.near_gimbal_lock ? 1.0 : 0.0},
                 {"duration_s", t_last - t_first}};
      if (!truth.back().yaw_observable)
        std::cerr << "warning: final reference has no observable yaw; yaw_deg is not meaningful\n";
      if (r.near_gimbal_lock)
        std::cerr << "warning: attitude is within 1e-6 deg of gimbal lock; roll and yaw are ambiguous\n";
    }
  }

  WriteMetricCsv(metrics, metrics_path);
  manifest.AddOutput(metrics_path);
  manifest.Write(manifest_path);
  PrintMetrics(metrics);
  return kExitOk;
}

// ---------------------------------------------------------------- export

struct ExportArgs
{
  std::string weights;
  std::string out;
  bool force = false;
};

int RunExport(const ExportArgs& a, const CLI::App& sub)
{
  if (a.weights.empty() || a.out.empty())
    throw UsageError("--weights and --out are required");
  const fs::path out(a.out);
  const fs::path dump(a.out + ".txt");
  for (const fs::path& p : {out, dump, ManifestFor(out)})
    RequireWritable(p, a.force);
  RequireDistinct(a.weights, out);

  const ModelWeights w = LoadAnyWeights(a.weights);
  const std::vector<std::uint8_t> bytes = EncodeWeights(w); // refuses non-finite values
  EnsureParent(out);
  ExportWeights(w, out);

  const std::size_t calib = ParamCount(w.calib);
  const std::size_t denoise = w.denoise ? ParamCount(*w.denoise) : 0;
  {
    std::ofstream d(dump, std::ios::trunc);
    if (!d)
      throw DataError("cannot write " + dump.string());
    d << "magic=TGCN\n"
      << "version=" << kWeightFormatVersion << '\n'
      << "calib_params=" << calib << '\n'
      << "denoise_params=" << denoise << '\n'
      << "total_params=" << calib + denoise << '\n'
      << "header_bytes=" << kWeightHeaderBytes << '\n'
      << "payload_bytes=" << 4 * (calib + denoise) << '\n'
      << "file_bytes=" << bytes.size() << '\n';
  }
  Manifest manifest("export", sub, 0);
  manifest.AddInput(a.weights);
  manifest.AddOutput(out);
  manifest.AddOutput(dump);
  manifest.Write(ManifestFor(out));
  std::cout << "calib_params=" << calib << " denoise_params=" << denoise << " total_params=" << calib + denoise
            << " bytes=" << bytes.size() << '\n';
  return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Tiny gyroscope calibration and denoising toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate turntable-protocol logs with a known distortion");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--segments", sim.segments, "Number of 5 s segments");
  simulate->add_option("--rate", sim.rate, "Sample rate in Hz");
  simulate->add_option("--profile", sim.profile, "Rotation phase: static, sinusoids or random-smooth");
  simulate->add_option("--scale-err", sim.scale_err, "Scale error bound (fraction)");
  simulate->add_option("--misalign-deg", sim.misalign_deg, "Misalignment bound in degrees");
  simulate->add_option("--bias", sim.bias, "Bias bound in rad/s");
  simulate->add_option("--noise", sim.noise, "White noise sigma in rad/s per sample");
  simulate->add_option("--static-seconds", sim.static_seconds, "Static phase length");
  simulate->add_option("--motion-seconds", sim.motion_seconds, "Rotation phase length");
  simulate->add_option("--distortion-from", sim.distortion_from,
                       "Reuse E and B from a truth.json sidecar (for held-out runs)");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_flag("--force", sim.force, "Overwrite existing outputs");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train the calibration or denoising subnet");
  train->add_option("--phase", tr.phase, "calib or denoise");
  train->add_option("--data", tr.data, "Log file or directory");
  train->add_option("--format", tr.format, "turntable or euroc");
  train->add_option("--epochs", tr.epochs, "Training epochs");
  train->add_option("--lr", tr.lr, "AdamW learning rate");
  train->add_option("--wd", tr.wd, "AdamW decoupled weight decay");
  train->add_option("--n", tr.n, "Denoising window N (phase calib uses 1)");
  train->add_option("--m", tr.m, "Segment length M (EuRoC; turntable logs segment at references)");
  train->add_option("--seed", tr.seed, "Denoiser initialization seed");
  train->add_option("--weights-in", tr.weights_in, "Starting weights (required for phase denoise)");
  train->add_option("--weights-out", tr.weights_out, "Output weights (.json checkpoint or .tgcn)");
  train->add_option("--trace", tr.trace, "Loss trace CSV (default: <weights-out>.loss.csv)");
  train->add_flag("--gravity-refs", tr.gravity_refs,
                  "Synthesize references from accelerometer static windows when logs have none");
  train->add_flag("--keep-last", tr.keep_last,
                  "Keep the last iterate instead of the one with the lowest training loss");
  train->add_flag("--quiet", tr.quiet, "Do not print per-epoch progress");
  train->add_flag("--force", tr.force, "Overwrite existing outputs");

  ApplyArgs ap;
  auto* apply = app.add_subcommand("apply", "Correct a rate log with trained weights");
  apply->add_option("--weights", ap.weights, "Weights file");
  apply->add_option("--data", ap.data, "Turntable log or EuRoC directory");
  apply->add_option("--stage", ap.stage, "calib or calib+denoise");
  apply->add_option("--n", ap.n, "Denoising window (default: from the weights)");
  apply->add_option("--out", ap.out, "Output log");
  apply->add_flag("--force", ap.force, "Overwrite existing outputs");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Compute AOE, endpoint error or spectra");
  eval->add_option("--est", ev.est, "Estimate: rate log, attitude track or EuRoC directory");
  eval->add_option("--truth", ev.truth, "Truth: attitude track, log with references or EuRoC directory");
  eval->add_option("--before", ev.before, "Spectrum: sequence before denoising");
  eval->add_option("--metric", ev.metric, "aoe, endpoint or spectrum");
  eval->add_option("--rate", ev.rate, "Spectrum sample rate in Hz (default: inferred)");
  eval->add_option("--high-cutoff", ev.high_cutoff, "High band lower edge in Hz");
  eval->add_option("--low-cutoff", ev.low_cutoff, "Low band upper edge in Hz");
  eval->add_option("--out", ev.out, "Output directory");
  eval->add_flag("--force", ev.force, "Overwrite existing outputs");

  ExportArgs ex;
  auto* exp = app.add_subcommand("export", "Write the 32-bit deployment container");
  exp->add_option("--weights", ex.weights, "Weights file");
  exp->add_option("--out", ex.out, "Output .tgcn file");
  exp->add_flag("--force", ex.force, "Overwrite existing outputs");

  std::string config_path;
  for (CLI::App* sub : {simulate, train, apply, eval, exp})
    sub->add_option("--config", config_path, "Plain key=value file; explicit flags take precedence");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try
  {
    if (!config_path.empty())
      ApplyConfig(*app.get_subcommands().front(), config_path);
    if (*simulate)
      return RunSimulate(sim, *simulate);
    if (*train)
      return RunTrain(tr, *train);
    if (*apply)
      return RunApply(ap, *apply);
    if (*eval)
      return RunEval(ev, *eval);
    return RunExport(ex, *exp);
  }
  catch (const UsageError& e)
  {
    std::cerr << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return kExitUsage;
  }
  catch (const NumericError& e)
  {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  catch (const DataError& e)
  {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  catch (const InvalidArgument& e)
  {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  catch (const fs::filesystem_error& e)
  {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
}
