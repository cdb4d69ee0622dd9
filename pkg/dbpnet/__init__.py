# -*- coding: utf-8 -*-
"""
Damper-conditioned Bayesian physics-informed wheel-load estimation bench.

Modules:
- kinematics / dynamics: suspension linkage closure, link forces, quarter-car prior
- scenarios / plant / dataset: synthetic vehicle benchmark
- neural / estimators / ekf: DBPnet, PINN and EKF estimators
- report / pipeline: bench commands and their artifacts
"""

from .context import BenchContext
from .validation import BenchError, ConfigError, BenchIoError, NumericalFailure, AcceptanceFailure

__all__ = [
    "BenchContext",
    "BenchError",
    "ConfigError",
    "BenchIoError",
    "NumericalFailure",
    "AcceptanceFailure",
]
