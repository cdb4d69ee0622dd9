# -*- coding: utf-8 -*-
"""
Sensor channels and wheel-load records shared by the plant, the dataset
files and the estimators. Column order here is the on-disk CSV order.
"""

from dataclasses import dataclass, replace
from typing import List

import numpy as np
import pandas as pd

from dbpnet.models import CORNERS
from dbpnet.validation import ShapeError


CORNER_GROUPS = ("a_spr", "a_unspr", "d_sus", "dd_sus", "F_p")

INPUT_COLUMNS: List[str] = ["delta"] + [f"{group}_{corner}" for group in CORNER_GROUPS for corner in CORNERS]
TRUTH_COLUMNS: List[str] = [f"F_{corner}" for corner in CORNERS]
CSV_COLUMNS: List[str] = ["t"] + INPUT_COLUMNS + TRUTH_COLUMNS

N_INPUTS = len(INPUT_COLUMNS)


def _corner_block(values, n: int, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.shape != (n, 4):
        raise ShapeError(f"Channel group '{name}' must have shape ({n}, 4), got {array.shape}")
    return array


@dataclass
class SensorSample:
    """
    Network input x_t for one or many time steps.

    Per-corner groups are (n, 4) arrays in fl, fr, rl, rr order; t and
    delta are (n,).
    """
    t: np.ndarray
    delta: np.ndarray
    a_spr: np.ndarray
    a_unspr: np.ndarray
    d_sus: np.ndarray
    dd_sus: np.ndarray
    F_p: np.ndarray

    def __post_init__(self):
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        n = self.t.shape[0]
        self.delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if self.delta.shape != (n,):
            raise ShapeError(f"delta must have shape ({n},), got {self.delta.shape}")
        for name in CORNER_GROUPS:
            setattr(self, name, _corner_block(np.atleast_2d(getattr(self, name)), n, name))

    def __len__(self) -> int:
        return self.t.shape[0]

    def to_matrix(self) -> np.ndarray:
        """(n, 21) matrix in INPUT_COLUMNS order."""
        return np.column_stack([self.delta] + [getattr(self, name) for name in CORNER_GROUPS])

    @classmethod
    def from_matrix(cls, t, matrix: np.ndarray) -> "SensorSample":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[1] != N_INPUTS:
            raise ShapeError(f"Input matrix needs {N_INPUTS} columns, got {matrix.shape[1]}")
        groups = {name: matrix[:, 1 + 4 * i: 5 + 4 * i] for i, name in enumerate(CORNER_GROUPS)}
        return cls(t=t, delta=matrix[:, 0], **groups)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "SensorSample":
        return cls.from_matrix(frame["t"].to_numpy(), frame[INPUT_COLUMNS].to_numpy())

    def copy(self) -> "SensorSample":
        return replace(self, **{name: getattr(self, name).copy() for name in ("t", "delta") + CORNER_GROUPS})


@dataclass
class WheelLoads:
    """Vertical tire loads (N), shape (n, 4) in fl, fr, rl, rr order."""
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != 4:
            raise ShapeError(f"Wheel loads need 4 columns, got shape {self.values.shape}")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def F_fl(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def F_fr(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def F_rl(self) -> np.ndarray:
        return self.values[:, 2]

    @property
    def F_rr(self) -> np.ndarray:
        return self.values[:, 3]

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "WheelLoads":
        return cls(frame[TRUTH_COLUMNS].to_numpy())


def sample_frame(sample: SensorSample, loads: WheelLoads) -> pd.DataFrame:
    """Assemble the CSV frame (CSV_COLUMNS order) for a run."""
    if len(sample) != len(loads):
        raise ShapeError(f"{len(sample)} sensor rows but {len(loads)} load rows")
    data = np.column_stack([sample.t, sample.to_matrix(), loads.values])
    return pd.DataFrame(data, columns=CSV_COLUMNS)
