#!/usr/bin/env python3
#
#  Copyright (C) 2026 The gyrocal Authors
#
#  SPDX-License-Identifier: Apache-2.0
#  See the file LICENSE for more information.
#

"""Write simulated sequences in the EuRoC MAV directory layout.

Each sequence gets mav0/imu0/data.csv (distorted gyro, specific force) and
mav0/state_groundtruth_estimate0/data.csv (true attitude). All sequences share
one sampled distortion, printed on stdout as JSON.
"""

import argparse
import json
import pathlib

import numpy as np

import gyrocal

SEQUENCES = [
    "MH_01_easy", "MH_02_easy", "MH_03_medium", "MH_04_difficult", "MH_05_difficult",
    "V1_01_easy", "V1_02_medium", "V1_03_difficult",
    "V2_01_easy", "V2_02_medium", "V2_03_difficult",
]
ORIGIN_NS = 1403636579758555392
GRAVITY = 9.80665

IMU_HEADER = ("#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
              "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n")
GT_HEADER = "#timestamp,p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z []\n"


def specific_force(q):
    # Body-frame reading of a stationary accelerometer: R(q)^T (0, 0, -g), z down.
    w, x, y, z = q.T
    return -GRAVITY * np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=1)


def write_sequence(root, name, seed, seconds, rate, e, b, sigma, rng):
    traj = gyrocal.gen_trajectory(seed, seconds, rate, "random-smooth")
    omega = np.asarray(traj["rates"])
    q = np.asarray(traj["attitudes"])
    raw = (np.linalg.inv(e) @ (omega - b).T).T + rng.normal(0.0, sigma, omega.shape)
    accel = specific_force(q)
    ns = ORIGIN_NS + np.arange(len(omega), dtype=np.int64) * int(round(1e9 / rate))

    mav = root / name / "mav0"
    (mav / "imu0").mkdir(parents=True, exist_ok=True)
    (mav / "state_groundtruth_estimate0").mkdir(parents=True, exist_ok=True)
    with open(mav / "imu0" / "data.csv", "w") as f:
        f.write(IMU_HEADER)
        for t, g, a in zip(ns, raw, accel):
            f.write(",".join([str(int(t))] + [repr(float(v)) for v in (*g, *a)]) + "\n")
    # Ground truth starts and ends a little inside the IMU span, as in the real data.
    with open(mav / "state_groundtruth_estimate0" / "data.csv", "w") as f:
        f.write(GT_HEADER)
        for t, qq in zip(ns[10:-10], q[10:-10]):
            f.write(",".join([str(int(t)), "0", "0", "0"] + [repr(float(v)) for v in qq]) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", type=pathlib.Path)
    parser.add_argument("--seed", type=int, default=77)
    parser.add_argument("--seconds", type=float, default=40.0)
    parser.add_argument("--rate", type=float, default=200.0)
    args = parser.parse_args()

    e, b, sigma = gyrocal.sample_distortion(args.seed)
    rng = np.random.default_rng(args.seed)
    for i, name in enumerate(SEQUENCES):
        write_sequence(args.out, name, args.seed * 1000 + i, args.seconds, args.rate, e, b, sigma, rng)
    print(json.dumps({"E": np.asarray(e).tolist(), "B": np.asarray(b).tolist(), "noise_sigma": sigma}))


if __name__ == "__main__":
    main()
