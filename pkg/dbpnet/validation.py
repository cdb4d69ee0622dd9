# -*- coding: utf-8 -*-
"""
Validation and safety checks for the wheel-load bench.
Holds the exception hierarchy every module raises, the CLI exit-code map,
and the pre-flight checks run on geometry files and run configs.
"""

from pathlib import Path
from typing import Dict, List, Type

import numpy as np

from dbpnet.models import GeometryFile, RunConfig, HARD_POINT_NAMES


# ========== Exceptions ==========

class BenchError(Exception):
    """Base class for every failure the bench reports."""
    pass


class ConfigError(BenchError):
    """Invalid or missing configuration, geometry or scenario definition."""
    pass


class BenchIoError(BenchError):
    """Unreadable, unwritable or schema-invalid file."""
    pass


class NumericalFailure(BenchError):
    """A numerical routine could not produce a trustworthy result."""
    pass


class NoSolution(NumericalFailure):
    """The closure equation has no real root for this pose."""
    pass


class KinematicLockup(NumericalFailure):
    """A suspension submechanism cannot close at the requested inputs."""
    pass


class TravelOutOfRange(NumericalFailure, ValueError):
    """Rack or damper travel outside the configured limits."""
    pass


class DegenerateLink(NumericalFailure):
    """Two link endpoints coincide, so the link has no direction."""
    pass


class SingularConfiguration(NumericalFailure):
    """The equilibrium matrix is too ill-conditioned to solve."""
    pass


class IntegrationDiverged(NumericalFailure):
    """The plant state left its configured bound."""
    pass


class NonFiniteLoss(NumericalFailure):
    """Training produced NaN or Inf."""
    pass


class CovarianceNotPSD(NumericalFailure):
    """The EKF covariance lost positive semi-definiteness."""
    pass


class ShapeError(BenchError, ValueError):
    pass


class EmptyBatch(BenchError, ValueError):
    pass


class EmptySplit(BenchError, ValueError):
    pass


class LengthMismatch(BenchError, ValueError):
    pass


class AcceptanceFailure(BenchError):
    """A self-check ran to completion but missed its tolerance."""
    pass


# Checked in order, so subclasses must precede their bases.
EXIT_CODES: Dict[Type[BaseException], int] = {
    ConfigError: 3,
    BenchIoError: 4,
    NumericalFailure: 5,
    AcceptanceFailure: 6,
}


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the documented CLI exit code (1 if unmapped)."""
    for exc_type, code in EXIT_CODES.items():
        if isinstance(exc, exc_type):
            return code
    return 1


# ========== Geometry Checks ==========

def validate_geometry(geometry: GeometryFile) -> List[str]:
    """
    Check a parsed geometry file for physically impossible values.

    Returns:
        List of validation errors (empty if valid)
    """
    errors = []
    points = {name: np.asarray(geometry.hard_points[name], dtype=float) for name in HARD_POINT_NAMES}

    for name, p in points.items():
        if not np.all(np.isfinite(p)):
            errors.append(f"Hard point '{name}' has non-finite coordinates {p.tolist()}")
    if errors:
        return errors

    # Check 1: revolute axes have length
    for a, b in (("u1", "u2"), ("l1", "l2")):
        if np.linalg.norm(points[a] - points[b]) <= 1e-9:
            errors.append(f"Axis {a}-{b} has zero length")

    # Check 2: every link has length
    links = {
        "damper": ("p1", "p2"),
        "upper_front": ("u1", "s1"),
        "upper_rear": ("u2", "s1"),
        "lower_front": ("l1", "s3"),
        "lower_rear": ("l2", "s3"),
        "tie_rod": ("t", "s2"),
        "kingpin": ("s1", "s3"),
    }
    for link, (a, b) in links.items():
        if np.linalg.norm(points[a] - points[b]) <= 1e-9:
            errors.append(f"Link '{link}' ({a}-{b}) has zero length")

    # Check 3: knuckle is a proper triangle
    edge_a = points["s1"] - points["s3"]
    edge_b = points["s2"] - points["s3"]
    if np.linalg.norm(np.cross(edge_a, edge_b)) <= 1e-9:
        errors.append("Knuckle points s1, s2, s3 are collinear")

    # Check 4: declared coupler lengths agree with the hard points
    measured = {
        "damper": np.linalg.norm(points["p1"] - points["p2"]),
        "upper": np.linalg.norm(points["s1"] - points["s3"]),
        "steering": np.linalg.norm(points["s2"] - points["t"]),
    }
    for chain_name, chain in geometry.chains.items():
        if chain.coupler_length is None:
            continue
        if not chain.coupler_length > 0:
            errors.append(
                f"Chain '{chain_name}' declares non-positive coupler length {chain.coupler_length}"
            )
        elif chain_name in measured and abs(chain.coupler_length - measured[chain_name]) > 1e-6:
            errors.append(
                f"Chain '{chain_name}' declares coupler length {chain.coupler_length:.6f} m "
                f"but hard points give {measured[chain_name]:.6f} m"
            )

    # Check 5: unsprung body
    body = geometry.unsprung
    inertia = np.asarray(body.inertia, dtype=float)
    if inertia.shape != (3, 3):
        errors.append(f"Unsprung inertia must be 3x3, got shape {inertia.shape}")
    elif not np.allclose(inertia, inertia.T, atol=1e-12):
        errors.append("Unsprung inertia is not symmetric")
    elif np.linalg.eigvalsh(inertia).min() <= 0:
        errors.append("Unsprung inertia is not positive-definite")

    # Check 6: travel windows contain the design position
    for key, (lo, hi) in (("x_a", geometry.travel_limits.x_a), ("x_d", geometry.travel_limits.x_d)):
        if not lo <= 0.0 <= hi:
            errors.append(f"Travel window for {key} [{lo}, {hi}] excludes the design position")

    return errors


# ========== Run Config Checks ==========

def validate_run_config(config: RunConfig) -> List[str]:
    """
    Cross-field checks pydantic cannot express on its own.

    Returns:
        List of validation errors (empty if valid)
    """
    errors = []

    steps = config.plant.output_period / config.plant.dt
    if abs(steps - round(steps)) > 1e-9:
        errors.append(
            f"Output period {config.plant.output_period} s is not a multiple of dt {config.plant.dt} s"
        )

    names = config.scenarios.names
    if len(set(names)) != len(names):
        errors.append("Scenario selection lists a scenario more than once")

    split = config.split
    if split.counts is None:
        assigned = list(split.train) + list(split.validation) + list(split.test)
        if len(set(assigned)) != len(assigned):
            errors.append("A scenario is assigned to more than one split")
        unknown = sorted(set(assigned) - set(names))
        if unknown:
            errors.append(f"Split names scenarios that are not selected: {unknown}")
    else:
        total = sum(split.counts.values())
        if total > len(names):
            errors.append(f"Split counts need {total} scenarios but only {len(names)} selected")

    return errors


def validate_paths(geometry_path: Path, output_dir: Path) -> List[str]:
    """Files that must exist before any command runs."""
    errors = []
    if not geometry_path.exists():
        errors.append(f"Geometry file not found: {geometry_path}")
    if output_dir.exists() and not output_dir.is_dir():
        errors.append(f"Output path is a file, not a directory: {output_dir}")
    return errors


def validate_bench(config: RunConfig, geometry_path: Path, output_dir: Path) -> Dict[str, List[str]]:
    """Run every pre-flight check; keys name the section checked."""
    return {
        "run_config": validate_run_config(config),
        "paths": validate_paths(geometry_path, output_dir),
    }


def has_critical_errors(validation_results: Dict[str, List[str]]) -> bool:
    return any(validation_results.values())


def format_validation_report(validation_results: Dict[str, List[str]]) -> str:
    """Render check results as one block, failing sections first."""
    lines = ["Pre-flight checks", "=" * 60]
    ordered = sorted(validation_results.items(), key=lambda item: not item[1])
    for section, errors in ordered:
        title = section.replace("_", " ").title()
        if not errors:
            lines.append(f"✅ {title}: ok")
            continue
        lines.append(f"❌ {title}: {len(errors)} problem(s)")
        lines.extend(f"   - {error}" for error in errors)
    return "\n".join(lines) + "\n"
