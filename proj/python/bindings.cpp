/*
 *  Copyright (C) 2026 The gyrocal Authors
 *
 *  SPDX-License-Identifier: Apache-2.0
 *  See the file LICENSE for more information.
 */

// Python bindings. Quaternions are length-4 arrays (w, x, y, z), rate
// sequences are (n, 3) arrays and network parameters travel as flat arrays
// in canonical order (27 calibration scalars, 168 denoiser scalars).

#include "gyrocal/data_io.hpp"
#include "gyrocal/errors.hpp"
#include "gyrocal/metrics.hpp"
#include "gyrocal/net.hpp"
#include "gyrocal/quat.hpp"
#include "gyrocal/sim.hpp"
#include "gyrocal/train.hpp"
#include "gyrocal/weights.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace gyrocal;

namespace
{
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Quat ToQuat(const Array& a)
{
  if (a.size() != 4)
    throw InvalidArgument("quaternion must have 4 elements");
  const double* p = a.data();
  return {p[0], p[1], p[2], p[3]};
}

Array FromQuat(const Quat& q)
{
  Array out(std::vector<py::ssize_t>{4});
  double* p = out.mutable_data();
  p[0] = q.w;
  p[1] = q.x;
  p[2] = q.y;
  p[3] = q.z;
  return out;
}

Vec3 ToVec3(const Array& a)
{
  if (a.size() != 3)
    throw InvalidArgument("vector must have 3 elements");
  return {a.data()[0], a.data()[1], a.data()[2]};
}

std::vector<Vec3> ToVec3s(const Array& a)
{
  if (a.ndim() != 2 || a.shape(1) != 3)
    throw InvalidArgument("expected an (n, 3) array");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  const double* p = a.data();
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = {p[3 * k], p[3 * k + 1], p[3 * k + 2]};
  return out;
}

Array FromVec3s(const std::vector<Vec3>& v)
{
  Array out({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
  double* p = out.mutable_data();
  for (std::size_t k = 0; k < v.size(); ++k)
    for (int a = 0; a < 3; ++a)
      p[3 * k + a] = v[k][a];
  return out;
}

Array FromQuats(const std::vector<Quat>& q)
{
  Array out({static_cast<py::ssize_t>(q.size()), py::ssize_t{4}});
  double* p = out.mutable_data();
  for (std::size_t k = 0; k < q.size(); ++k)
  {
    p[4 * k] = q[k].w;
    p[4 * k + 1] = q[k].x;
    p[4 * k + 2] = q[k].y;
    p[4 * k + 3] = q[k].z;
  }
  return out;
}

std::vector<Quat> ToQuats(const Array& a)
{
  if (a.ndim() != 2 || a.shape(1) != 4)
    throw InvalidArgument("expected an (n, 4) array");
  std::vector<Quat> out(static_cast<std::size_t>(a.shape(0)));
  const double* p = a.data();
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = {p[4 * k], p[4 * k + 1], p[4 * k + 2], p[4 * k + 3]};
  return out;
}

std::vector<double> ToVector(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array FromVector(const std::vector<double>& v)
{
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template<typename Net>
Net NetFromArray(const Array& a)
{
  if (static_cast<std::size_t>(a.size()) != Net::kSize)
    throw InvalidArgument("expected " + std::to_string(Net::kSize) + " parameters, got " +
                          std::to_string(a.size()));
  return Unflatten<Net, double>(std::span<const double>(a.data(), Net::kSize));
}

py::dict TrajectoryDict(const TruthTrajectory& t)
{
  py::dict d;
  d["timestamps"] = FromVector(t.timestamps);
  d["rates"] = FromVec3s(t.rates);
  d["attitudes"] = FromQuats(t.attitudes);
  return d;
}

py::dict SequenceDict(const GyroSequence& s)
{
  py::dict d;
  d["timestamps"] = FromVector(s.timestamps);
  d["samples"] = FromVec3s(s.samples);
  if (!s.accel.empty())
    d["accel"] = FromVec3s(s.accel);
  py::list refs;
  for (const AttitudeReference& r : s.references)
    refs.append(py::make_tuple(r.t, FromQuat(r.q), r.yaw_observable));
  d["references"] = refs;
  return d;
}

SegmentDataset DatasetFromLogs(const std::vector<std::filesystem::path>& logs, std::size_t n)
{
  SegmentDataset data;
  for (const auto& path : logs)
    data.Append(SegmentByReferences(LoadTurntableLog(path), n).dataset);
  return data;
}
} // namespace

PYBIND11_MODULE(_gyrocal, m)
{
  m.doc() = "Tiny gyroscope calibration and denoising network";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.attr("CALIB_PARAMS") = CalibNetParams::kSize;
  m.attr("DENOISE_PARAMS") = DenoiseNetParams::kSize;
  m.attr("RECEPTIVE_FIELD") = DenoiseNetParams::kReceptiveField;

  // Quaternions.
  m.def("quat_mul", [](const Array& a, const Array& b) { return FromQuat(QuatMul(ToQuat(a), ToQuat(b))); });
  m.def("integrate_step", [](const Array& q, const Array& w, double dt) {
    return FromQuat(IntegrateStep(ToQuat(q), ToVec3(w), dt));
  });
  m.def("quat_diff", [](const Array& a, const Array& b) { return QuatDiff(ToQuat(a), ToQuat(b)); });
  m.def("quat_to_euler", [](const Array& q) {
    const EulerAngles e = QuatToEuler(ToQuat(q));
    return py::make_tuple(e.roll_deg, e.pitch_deg, e.yaw_deg);
  });
  m.def("quat_from_euler", [](double r, double p, double y) { return FromQuat(QuatFromEuler(r, p, y)); },
        py::arg("roll_deg"), py::arg("pitch_deg"), py::arg("yaw_deg"));
  m.def("quat_from_gravity", [](const Array& a) { return FromQuat(QuatFromGravity(ToVec3(a))); });
  m.def("so3_log_of_quat", [](const Array& q) {
    const Vec3 v = So3Log(QuatToRotMat(ToQuat(q)));
    return FromVector({v[0], v[1], v[2]});
  });

  // Networks.
  m.def("identity_calib", [] { return FromVector(Flatten(CalibNetParams::Identity())); });
  m.def("init_denoise", [](std::uint64_t seed) { return FromVector(Flatten(InitDenoiseNet(seed))); },
        py::arg("seed") = 0);
  m.def("param_count", [](bool with_denoiser) {
    return with_denoiser ? CalibNetParams::kSize + DenoiseNetParams::kSize : CalibNetParams::kSize;
  }, py::arg("with_denoiser") = false);
  m.def("calib_forward", [](const Array& params, const Array& raw) {
    return FromVec3s(CalibrateSequence(NetFromArray<CalibNetParams>(params), ToVec3s(raw)));
  }, py::arg("params"), py::arg("raw"));
  m.def("denoise_sequence", [](const Array& params, const Array& rates, std::size_t window) {
    return FromVec3s(DenoiseSequence(NetFromArray<DenoiseNetParams>(params), ToVec3s(rates), window));
  }, py::arg("params"), py::arg("rates"), py::arg("window") = 50);
  m.def("probe_affine_map", [](const Array& params) {
    const LbnParams p = ProbeAffineMap(NetFromArray<CalibNetParams>(params));
    Array e({py::ssize_t{3}, py::ssize_t{3}});
    std::copy(p.e.begin(), p.e.end(), e.mutable_data());
    return py::make_tuple(e, FromVector({p.b[0], p.b[1], p.b[2]}));
  });

  // Weights.
  m.def("export_weights", [](const Array& calib, std::optional<Array> denoise, const std::filesystem::path& path) {
    ModelWeights w;
    w.calib = NetFromArray<CalibNetParams>(calib);
    if (denoise)
      w.denoise = NetFromArray<DenoiseNetParams>(*denoise);
    ExportWeights(w, path);
  }, py::arg("calib"), py::arg("denoise"), py::arg("path"));
  m.def("load_weights", [](const std::filesystem::path& path) {
    const ModelWeights w = LoadAnyWeights(path);
    py::object denoise = py::none();
    if (w.denoise)
      denoise = FromVector(Flatten(*w.denoise));
    return py::make_tuple(FromVector(Flatten(w.calib)), denoise);
  });

  // Simulation.
  m.def("sample_distortion", [](std::uint64_t seed, double scale_err, double misalign_deg, double bias,
                                double noise) {
    const DistortionGroundTruth d = SampleDistortion(seed, {scale_err, misalign_deg, bias, noise});
    Array e({py::ssize_t{3}, py::ssize_t{3}});
    std::copy(d.e.begin(), d.e.end(), e.mutable_data());
    return py::make_tuple(e, FromVector({d.b[0], d.b[1], d.b[2]}), d.noise_sigma);
  }, py::arg("seed"), py::arg("scale_err") = 0.05, py::arg("misalign_deg") = 2.0, py::arg("bias") = 0.02,
        py::arg("noise") = kDefaultNoiseSigma);
  m.def("gen_trajectory", [](std::uint64_t seed, double duration, double rate, const std::string& profile) {
    MotionProfile p;
    p.kind = ParseMotionKind(profile);
    return TrajectoryDict(GenTrajectory(seed, duration, rate, p));
  }, py::arg("seed"), py::arg("duration"), py::arg("rate") = 200.0, py::arg("profile") = "random-smooth");
  m.def("gen_turntable_session", [](std::uint64_t seed, const Array& e, const Array& b, double noise,
                                    std::size_t segments, double motion_s) {
    DistortionGroundTruth d;
    if (e.size() != 9)
      throw InvalidArgument("E must have 9 elements");
    std::copy(e.data(), e.data() + 9, d.e.begin());
    d.b = ToVec3(b);
    d.noise_sigma = noise;
    TurntableOptions options;
    options.motion_s = motion_s;
    const TurntableSession s = GenTurntableSession(seed, d, segments, options);
    py::list out;
    for (const TurntableSegment& seg : s.segments)
    {
      py::dict item = SequenceDict(seg.log);
      item["truth"] = TrajectoryDict(seg.truth);
      out.append(item);
    }
    return out;
  }, py::arg("seed"), py::arg("E"), py::arg("B"), py::arg("noise"), py::arg("segments"),
        py::arg("motion_s") = 3.0);

  // Data.
  m.def("load_turntable_log", [](const std::filesystem::path& p) { return SequenceDict(LoadTurntableLog(p)); });

  // Training.
  m.def("train_calibration", [](const std::vector<std::filesystem::path>& logs, std::size_t epochs, double lr,
                                std::optional<std::function<void(std::size_t, double)>> on_epoch, bool keep_best) {
    const SegmentDataset data = DatasetFromLogs(logs, 1);
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.keep_best = keep_best;
    if (on_epoch)
      cfg.on_epoch = *on_epoch;
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = TrainCalibration(data, cfg);
    }
    return py::make_tuple(FromVector(Flatten(r.calib)), FromVector(r.loss_trace));
  }, py::arg("logs"), py::arg("epochs") = 2000, py::arg("lr") = 0.01, py::arg("on_epoch") = py::none(),
     py::arg("keep_best") = true);
  m.def("train_denoiser", [](const Array& calib, const std::vector<std::filesystem::path>& logs, std::size_t epochs,
                             double lr, std::size_t window, std::uint64_t seed, bool keep_best) {
    const CalibNetParams c = NetFromArray<CalibNetParams>(calib);
    const SegmentDataset data = DatasetFromLogs(logs, window);
    TrainConfig cfg;
    cfg.phase = TrainPhase::kDenoiser;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.window = window;
    cfg.seed = seed;
    cfg.keep_best = keep_best;
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = TrainDenoiser(c, data, cfg);
    }
    return py::make_tuple(FromVector(Flatten(*r.denoise)), FromVector(r.loss_trace));
  }, py::arg("calib"), py::arg("logs"), py::arg("epochs") = 2000, py::arg("lr") = 0.01, py::arg("window") = 50,
     py::arg("seed") = 0, py::arg("keep_best") = true);
  m.def("segment_loss_from_logs", [](const Array& calib, const std::vector<std::filesystem::path>& logs,
                                     std::optional<Array> denoise, std::size_t window) {
    const CalibNetParams c = NetFromArray<CalibNetParams>(calib);
    if (!denoise)
      return MeanSegmentLoss(c, nullptr, 1, DatasetFromLogs(logs, 1));
    const DenoiseNetParams d = NetFromArray<DenoiseNetParams>(*denoise);
    return MeanSegmentLoss(c, &d, window, DatasetFromLogs(logs, window));
  }, py::arg("calib"), py::arg("logs"), py::arg("denoise") = py::none(), py::arg("window") = 50);

  // Metrics.
  m.def("integrate_sequence", [](const Array& omega, const Array& q0, const Array& t) {
    const std::vector<double> ts = ToVector(t);
    return FromQuats(IntegrateSequence(ToVec3s(omega), ToQuat(q0), ts).attitudes);
  }, py::arg("omega"), py::arg("q0"), py::arg("timestamps"));
  m.def("aoe", [](const Array& est, const Array& truth, const Array& t) {
    AttitudeTrack a{ToVector(t), ToQuats(est)};
    AttitudeTrack b{ToVector(t), ToQuats(truth)};
    return Aoe(a, b);
  }, py::arg("estimate"), py::arg("truth"), py::arg("timestamps"));
  m.def("endpoint_error", [](const Array& est, const Array& ref) {
    const EndpointReport r = EndpointError(ToQuat(est), ToQuat(ref));
    py::dict d;
    d["roll_deg"] = r.roll_deg;
    d["pitch_deg"] = r.pitch_deg;
    d["yaw_deg"] = r.yaw_deg;
    d["rmse_deg"] = r.rmse_deg;
    d["near_gimbal_lock"] = r.near_gimbal_lock;
    return d;
  });
  m.def("power_spectrum", [](const Array& signal, double rate) {
    const Spectrum s = PowerSpectrum(ToVector(signal), rate);
    return py::make_tuple(FromVector(s.frequency_hz), FromVector(s.power));
  }, py::arg("signal"), py::arg("rate"));
}
