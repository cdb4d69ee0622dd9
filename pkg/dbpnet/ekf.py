# -*- coding: utf-8 -*-
"""
Per-corner quarter-car extended Kalman filter baseline.

State [z_s, zdot_s, z_u, zdot_u] (deviation from static, flat road assumed).
Measurements [d_sus, dd_sus, a_spr, a_unspr]. The wheel load is read off
the filtered state with the quarter-car force formula.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from dbpnet.channels import SensorSample, WheelLoads
from dbpnet.dataset import DatasetSplit
from dbpnet.dynamics import QuarterCarParams
from dbpnet.models import CORNERS, EkfConfig, VehicleParams
from dbpnet.plant import damper_force
from dbpnet.validation import CovarianceNotPSD, ShapeError


PSD_TOLERANCE = -1e-10


@dataclass(frozen=True)
class QuarterCarModel:
    """Two-mass corner model the filter propagates."""
    m_s: float
    m_u: float
    k_wheel: float
    k_tire: float
    motion_ratio: float
    vehicle: VehicleParams

    @classmethod
    def for_corner(cls, vehicle: VehicleParams, q: QuarterCarParams, corner: str, motion_ratio: float) -> "QuarterCarModel":
        front = corner in ("fl", "fr")
        return cls(
            m_s=q.m_spr,
            m_u=q.m_unspr,
            k_wheel=vehicle.stiffness_front if front else vehicle.stiffness_rear,
            k_tire=vehicle.tire_stiffness,
            motion_ratio=motion_ratio,
            vehicle=vehicle,
        )

    def _damper_slope(self, velocity: float) -> float:
        v = self.vehicle
        return v.damper_low + (v.damper_high - v.damper_low) / np.cosh(velocity / v.damper_knee) ** 2

    def suspension_force(self, x: np.ndarray) -> float:
        mr = self.motion_ratio
        return self.k_wheel * (x[2] - x[0]) + mr * float(damper_force(mr * (x[3] - x[1]), self.vehicle))

    def rates(self, x: np.ndarray) -> np.ndarray:
        F_s = self.suspension_force(x)
        F_t = -self.k_tire * x[2]
        return np.array([x[1], F_s / self.m_s, x[3], (F_t - F_s) / self.m_u])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """d(rates)/dx."""
        mr = self.motion_ratio
        k = self.k_wheel
        c = mr ** 2 * self._damper_slope(mr * (x[3] - x[1]))
        return np.array([
            [0.0, 1.0, 0.0, 0.0],
            [-k / self.m_s, -c / self.m_s, k / self.m_s, c / self.m_s],
            [0.0, 0.0, 0.0, 1.0],
            [k / self.m_u, c / self.m_u, -(k + self.k_tire) / self.m_u, -c / self.m_u],
        ])

    def propagate(self, x: np.ndarray, dt: float, substeps: int) -> np.ndarray:
        h = dt / substeps
        for _ in range(substeps):
            k1 = self.rates(x)
            k2 = self.rates(x + 0.5 * h * k1)
            k3 = self.rates(x + 0.5 * h * k2)
            k4 = self.rates(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return x

    def measure(self, x: np.ndarray) -> np.ndarray:
        """[d_sus, dd_sus, a_spr, a_unspr] predicted from the state."""
        r = self.rates(x)
        mr = self.motion_ratio
        return np.array([mr * (x[2] - x[0]), mr * (x[3] - x[1]), r[1], r[3]])

    def measurement_jacobian(self, x: np.ndarray) -> np.ndarray:
        mr = self.motion_ratio
        A = self.jacobian(x)
        return np.vstack([
            [-mr, 0.0, mr, 0.0],
            [0.0, -mr, 0.0, mr],
            A[1],
            A[3],
        ])


class CornerFilter:
    """Iterated EKF for one corner; Joseph-form covariance update."""

    def __init__(self, model: QuarterCarModel, cfg: EkfConfig):
        self.model = model
        self.cfg = cfg
        self.Q = np.diag(np.square(cfg.process_std))
        self.R = np.diag(np.square(cfg.measurement_std))
        self.reset()

    def reset(self) -> None:
        self.x = np.zeros(4)
        self.P = np.diag(np.square(self.cfg.initial_std))

    def predict(self, dt: float) -> None:
        Phi = expm(self.model.jacobian(self.x) * dt)
        self.x = self.model.propagate(self.x, dt, self.cfg.substeps)
        self.P = Phi @ self.P @ Phi.T + self.Q

    def update(self, z: np.ndarray) -> None:
        x_prior = self.x
        x_i = x_prior
        for _ in range(self.cfg.iterations):
            H = self.model.measurement_jacobian(x_i)
            S = H @ self.P @ H.T + self.R
            K = self.P @ H.T @ np.linalg.pinv(S)
            innovation = z - self.model.measure(x_i) - H @ (x_prior - x_i)
            x_i = x_prior + K @ innovation
        I_KH = np.eye(4) - K @ H
        self.P = I_KH @ self.P @ I_KH.T + K @ self.R @ K.T
        self.P = 0.5 * (self.P + self.P.T)
        self.x = x_i
        self._check_covariance()

    def _check_covariance(self) -> None:
        eigenvalues = np.linalg.eigvalsh(self.P)
        if eigenvalues.min() < PSD_TOLERANCE or not np.all(np.isfinite(eigenvalues)):
            raise CovarianceNotPSD(f"EKF covariance lost positive semi-definiteness (min eigenvalue {eigenvalues.min():.3g})")


def ekf_estimate(
    sample: SensorSample,
    params: VehicleParams,
    ekf: EkfConfig,
    q: QuarterCarParams,
    motion_ratio: float,
    run_starts: Optional[np.ndarray] = None,
) -> Tuple[WheelLoads, np.ndarray]:
    """
    Filter every corner over the series; filters restart wherever run_starts
    is True (and at row 0). Returns loads (n, 4) and filtered states (n, 4, 4).
    """
    n = len(sample)
    starts = np.zeros(n, dtype=bool) if run_starts is None else np.asarray(run_starts, dtype=bool)
    if starts.shape != (n,):
        raise ShapeError(f"run_starts needs shape ({n},), got {starts.shape}")
    if n:
        starts[0] = True

    F0, k, c = q.corner_arrays()
    loads = np.empty((n, 4))
    states = np.empty((n, 4, 4))
    for j, corner in enumerate(CORNERS):
        model = QuarterCarModel.for_corner(params, q, corner, motion_ratio)
        filt = CornerFilter(model, ekf)
        for i in range(n):
            if starts[i]:
                filt.reset()
            else:
                filt.predict(sample.t[i] - sample.t[i - 1])
            z = np.array([sample.d_sus[i, j], sample.dd_sus[i, j], sample.a_spr[i, j], sample.a_unspr[i, j]])
            filt.update(z)
            x = filt.x
            d, dd, a_u = model.measure(x)[[0, 1, 3]]
            loads[i, j] = F0[j] + k[j] * d + c[j] * dd + q.m_unspr * a_u
            states[i, j] = x
    return WheelLoads(loads), states


def ekf_estimate_split(
    split: DatasetSplit,
    params: VehicleParams,
    ekf: EkfConfig,
    q: QuarterCarParams,
    motion_ratio: float,
) -> WheelLoads:
    """EKF over a dataset split, restarting at each scenario."""
    starts: List[np.ndarray] = []
    for run in split.runs:
        flags = np.zeros(len(run), dtype=bool)
        flags[0] = True
        starts.append(flags)
    loads, _ = ekf_estimate(split.sample(), params, ekf, q, motion_ratio, np.concatenate(starts))
    return loads
