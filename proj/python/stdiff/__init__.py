# Copyright 2026 The stdiff Authors
# SPDX-License-Identifier: Apache-2.0
"""Graph-diffusion forecasting of sensor-network traffic speeds."""

from ._core import (
    InputError,
    Model,
    NumericError,
    encode_iteration_count,
    gaussian_adjacency,
    hstg,
    mae,
    mape,
    rmse,
    run_cli,
    synth,
    transition_matrix,
)

__all__ = [
    "InputError",
    "Model",
    "NumericError",
    "encode_iteration_count",
    "gaussian_adjacency",
    "hstg",
    "mae",
    "mape",
    "rmse",
    "run_cli",
    "synth",
    "transition_matrix",
]
