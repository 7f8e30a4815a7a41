#
#  Copyright (C) 2026 The gyrocal Authors
#
#  SPDX-License-Identifier: Apache-2.0
#  See the file LICENSE for more information.
#

import math

import numpy as np
import pytest

import gyrocal
from conftest import calib_params


def test_parameter_counts():
    assert gyrocal.param_count() == 27
    assert gyrocal.param_count(with_denoiser=True) == 195
    assert gyrocal.CALIB_PARAMS == 27
    assert gyrocal.DENOISE_PARAMS == 168
    assert len(gyrocal.identity_calib()) == 27
    assert len(gyrocal.init_denoise(3)) == 168


def test_hamilton_product():
    i = np.array([0.0, 1.0, 0.0, 0.0])
    j = np.array([0.0, 0.0, 1.0, 0.0])
    np.testing.assert_allclose(gyrocal.quat_mul(i, j), [0, 0, 0, 1])
    np.testing.assert_allclose(gyrocal.quat_mul(j, i), [0, 0, 0, -1])
    np.testing.assert_allclose(gyrocal.quat_mul(i, i), [-1, 0, 0, 0])


def test_integrate_step_and_euler():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    for _ in range(100):
        q = gyrocal.integrate_step(q, [0.0, 0.0, math.pi / 2], 0.01)
    roll, pitch, yaw = gyrocal.quat_to_euler(q)
    assert abs(yaw - 90.0) < 0.05
    assert abs(roll) < 1e-9 and abs(pitch) < 1e-9
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12
    back = gyrocal.quat_from_euler(10.0, -20.0, 30.0)
    np.testing.assert_allclose(gyrocal.quat_to_euler(back), (10.0, -20.0, 30.0), atol=1e-9)


def test_quat_diff_double_cover():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.normal(size=4)
        b = rng.normal(size=4)
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        assert gyrocal.quat_diff(a, b) == gyrocal.quat_diff(a, -b)
    assert gyrocal.quat_diff([1, 0, 0, 0], [-1, 0, 0, 0]) == 0.0


def test_invalid_input_raises_value_error():
    with pytest.raises(ValueError):
        gyrocal.integrate_step([1, 0, 0, 0], [math.nan, 0, 0], 0.01)
    with pytest.raises(gyrocal.InvalidArgument):
        gyrocal.quat_from_gravity([0.0, 0.0, 0.0])


def test_oracle_identity(distortion):
    e, b, _ = distortion
    traj = gyrocal.gen_trajectory(2, 2.0)
    truth = np.asarray(traj["rates"])
    raw = (np.linalg.inv(e) @ (truth - b).T).T
    out = np.asarray(gyrocal.calib_forward(calib_params(e, b), raw))
    np.testing.assert_allclose(out, truth, atol=1e-12)
    e_probe, b_probe = gyrocal.probe_affine_map(calib_params(e, b))
    np.testing.assert_allclose(e_probe, e, atol=1e-12)
    np.testing.assert_allclose(b_probe, b, atol=1e-12)


def test_integrate_and_aoe():
    traj = gyrocal.gen_trajectory(3, 20.0)
    t = np.asarray(traj["timestamps"])
    truth = np.asarray(traj["attitudes"])
    est = np.asarray(gyrocal.integrate_sequence(traj["rates"], truth[0], t))
    assert est.shape == truth.shape
    assert gyrocal.aoe(est, truth, t) < 0.05
    assert gyrocal.aoe(truth, truth, t) == 0.0


def test_endpoint_error():
    r = gyrocal.endpoint_error(gyrocal.quat_from_euler(1.0, -2.0, 3.0), [1, 0, 0, 0])
    assert r["roll_deg"] == pytest.approx(1.0)
    assert r["pitch_deg"] == pytest.approx(-2.0)
    assert r["yaw_deg"] == pytest.approx(3.0)
    assert r["rmse_deg"] == pytest.approx(math.sqrt(14.0 / 3.0))


def test_power_spectrum_parseval_and_peak():
    t = np.arange(1000) / 200.0
    x = np.sin(2 * np.pi * 5.0 * t)
    f, p = gyrocal.power_spectrum(x, 200.0)
    assert f[int(np.argmax(p))] == pytest.approx(5.0)
    noise = np.random.default_rng(0).normal(size=777)
    _, p = gyrocal.power_spectrum(noise, 100.0)
    assert abs(np.sum(p) - np.var(noise)) < 1e-9


def test_denoise_sequence_warm_up():
    rates = np.random.default_rng(2).normal(size=(80, 3))
    out = np.asarray(gyrocal.denoise_sequence(gyrocal.init_denoise(0), rates, 50))
    np.testing.assert_array_equal(out[:49], rates[:49])
    assert not np.allclose(out[49:], rates[49:])


def test_weights_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    calib = rng.normal(size=27).astype(np.float32).astype(np.float64)
    denoise = rng.normal(size=168).astype(np.float32).astype(np.float64)
    path = tmp_path / "model.tgcn"
    gyrocal.export_weights(calib, denoise, path)
    assert path.stat().st_size == 794
    c, d = gyrocal.load_weights(path)
    np.testing.assert_array_equal(c, calib)
    np.testing.assert_array_equal(d, denoise)
    gyrocal.export_weights(calib, None, tmp_path / "calib.tgcn")
    c, d = gyrocal.load_weights(tmp_path / "calib.tgcn")
    assert d is None
    with pytest.raises(gyrocal.DataError):
        gyrocal.load_weights(tmp_path / "missing.tgcn")


def test_load_turntable_log(session_logs):
    paths, session = session_logs
    seq = gyrocal.load_turntable_log(paths[0])
    np.testing.assert_array_equal(seq["samples"], session[0]["samples"])
    assert len(seq["references"]) == 2


def test_train_calibration_reduces_loss(session_logs):
    paths, _ = session_logs
    seen = []
    params, trace = gyrocal.train_calibration(paths, epochs=60, on_epoch=lambda e, l: seen.append(l))
    assert len(trace) == 60
    np.testing.assert_array_equal(seen, trace)
    assert gyrocal.segment_loss_from_logs(params, paths) < trace[0]
    again, _ = gyrocal.train_calibration(paths, epochs=60)
    np.testing.assert_array_equal(params, again)


def test_train_denoiser_keeps_calibration_input(session_logs, distortion):
    paths, _ = session_logs
    e, b, _ = distortion
    calib = calib_params(e, b)
    before = calib.copy()
    den, trace = gyrocal.train_denoiser(calib, paths, epochs=3)
    np.testing.assert_array_equal(calib, before)
    assert len(den) == 168 and len(trace) == 3
    loss = gyrocal.segment_loss_from_logs(calib, paths, den, 50)
    assert math.isfinite(loss)
