#
#  Copyright (C) 2026 The gyrocal Authors
#
#  SPDX-License-Identifier: Apache-2.0
#  See the file LICENSE for more information.
#

import os
import pathlib

import numpy as np
import pytest

import gyrocal


def write_turntable_log(seq, path):
    """Writes a simulated segment in the turntable schema with plain Python formatting."""
    refs = {t: q for t, q, _ in seq["references"]}
    with open(path, "w") as f:
        f.write("t_s,gx,gy,gz,ax,ay,az,ref_qw,ref_qx,ref_qy,ref_qz\n")
        for t, w, a in zip(seq["timestamps"], seq["samples"], seq["accel"]):
            cols = [repr(float(t))] + [repr(float(v)) for v in w] + [repr(float(v)) for v in a]
            q = refs.get(float(t))
            cols += [repr(float(v)) for v in q] if q is not None else ["", "", "", ""]
            f.write(",".join(cols) + "\n")


@pytest.fixture
def distortion():
    return gyrocal.sample_distortion(5)


@pytest.fixture
def session_logs(tmp_path, distortion):
    e, b, _ = distortion
    session = gyrocal.gen_turntable_session(15, e, b, 0.0015, 6)
    paths = []
    for j, seg in enumerate(session):
        p = tmp_path / f"segment_{j:03d}.csv"
        write_turntable_log(seg, p)
        paths.append(str(p))
    return paths, session


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("GYROCAL_CLI")
    if path is None:
        path = pathlib.Path(__file__).resolve().parents[2] / "build" / "gyrocal"
    path = pathlib.Path(path)
    if not path.exists():
        pytest.skip(f"command line tool not built at {path}")
    return str(path)


def calib_params(e, b):
    """Flat calibration parameters realising the affine map (E, B) exactly."""
    p = np.array(gyrocal.identity_calib())
    p[0:9] = np.asarray(e).reshape(9)
    p[9:12] = b
    return p
