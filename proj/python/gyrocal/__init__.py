#
#  Copyright (C) 2026 The gyrocal Authors
#
#  SPDX-License-Identifier: Apache-2.0
#  See the file LICENSE for more information.
#

"""Tiny gyroscope calibration and denoising network."""

from ._gyrocal import *  # noqa: F401,F403
from ._gyrocal import (
    CALIB_PARAMS,
    DENOISE_PARAMS,
    RECEPTIVE_FIELD,
    DataError,
    InvalidArgument,
    NumericError,
)

__all__ = [
    "CALIB_PARAMS",
    "DENOISE_PARAMS",
    "RECEPTIVE_FIELD",
    "DataError",
    "InvalidArgument",
    "NumericError",
    "aoe",
    "calib_forward",
    "denoise_sequence",
    "endpoint_error",
    "export_weights",
    "gen_trajectory",
    "gen_turntable_session",
    "identity_calib",
    "init_denoise",
    "integrate_sequence",
    "integrate_step",
    "load_turntable_log",
    "load_weights",
    "param_count",
    "power_spectrum",
    "probe_affine_map",
    "quat_diff",
    "quat_from_euler",
    "quat_from_gravity",
    "quat_mul",
    "quat_to_euler",
    "sample_distortion",
    "segment_loss_from_logs",
    "so3_log_of_quat",
    "train_calibration",
    "train_denoiser",
]
