# -*- coding: utf-8 -*-
"""
Suspension kinematics for a double-wishbone corner.

The corner is reduced to three RSSR (revolute-sphere-sphere-revolute) closure
chains:

- damper chain: the spring/damper p2-p1 is a variable-length coupler that
  rotates the lower control arm (LCA) about l1-l2 (prismatic limit, input x_d)
- upper chain: LCA crank s3, kingpin coupler s3-s1, upper arm (UCA) crank s1
- steering chain: rack slider t, tie-rod coupler t-s2, knuckle crank s2 about
  the current kingpin line (prismatic, input x_a)

Each closure reduces to A*sin(theta0) + B*cos(theta0) + C = 0 in a frame built
on the common perpendicular of the input and output axes.
"""

import json
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.spatial.transform import Rotation

from dbpnet.models import GeometryFile, HARD_POINT_NAMES
from dbpnet.validation import (
    BenchIoError,
    ConfigError,
    KinematicLockup,
    NoSolution,
    TravelOutOfRange,
    format_validation_report,
    validate_geometry,
)


TWO_PI = 2.0 * math.pi

class Branch(IntEnum):
    """Which of the two closure roots a chain follows."""
    ELBOW_PLUS = 1
    ELBOW_MINUS = -1


def normalize_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(angle, TWO_PI)
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


def direction_cosine(theta: float, alpha: float) -> np.ndarray:
    """Rz(theta) @ Rx(alpha)."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    rz = np.array([[ct, -st, 0.0], [st, ct, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    return rz @ rx


# ========== Closure Equation ==========

@dataclass(frozen=True)
class RssrGeometry:
    """
    Scalar description of one RSSR chain.

    h0 is the signed length of the common perpendicular, h1/h3 the crank radii,
    l the coupler, s0/s3 the spherical-joint offsets along the input/output
    axes and alpha30 the skew angle between the axes. A prismatic input is
    described with h1 = 0.
    """
    h0: float
    h1: float
    h3: float
    l: float
    s0: float
    s3: float
    alpha30: float

    def __post_init__(self):
        values = (self.h0, self.h1, self.h3, self.l, self.s0, self.s3, self.alpha30)
        if not all(math.isfinite(v) for v in values):
            raise ConfigError(f"RSSR geometry has non-finite entries: {values}")
        if self.h1 < 0:
            raise ConfigError(f"RSSR input crank h1 must be >= 0, got {self.h1}")
        if not self.h3 > 0:
            raise ConfigError(f"RSSR output crank h3 must be > 0, got {self.h3}")
        if not self.l > 0:
            raise ConfigError(f"RSSR coupler length must be > 0, got {self.l}")
        if not 0.0 <= self.alpha30 < math.pi:
            raise ConfigError(f"RSSR skew angle must lie in [0, pi), got {self.alpha30}")


def rssr_coefficients(g: RssrGeometry, theta1: float) -> Tuple[float, float, float]:
    """Coefficients (A, B, C) of A*sin(theta0) + B*cos(theta0) + C = 0 for a revolute input."""
    if g.h1 <= 0:
        raise ConfigError("Revolute closure needs an input crank h1 > 0")
    ca, sa = math.cos(g.alpha30), math.sin(g.alpha30)
    c1, s1 = math.cos(theta1), math.sin(theta1)
    a = ca * s1 - g.s0 * sa / g.h1
    b = -(g.h0 / g.h1 + c1)
    c = (
        (g.h1 ** 2 - g.l ** 2 + g.h3 ** 2 + g.h0 ** 2 + g.s3 ** 2 + g.s0 ** 2 - 2.0 * g.s3 * g.s0 * ca)
        / (2.0 * g.h1 * g.h3)
        + (g.h0 * c1 - g.s3 * sa * s1) / g.h3
    )
    return a, b, c


def rssr_prismatic_coefficients(g: RssrGeometry, s_travel: float) -> Tuple[float, float, float]:
    """Coefficients when the input slides along its axis (h1 -> 0); slider sits at s0 + s_travel."""
    ca, sa = math.cos(g.alpha30), math.sin(g.alpha30)
    s = g.s0 + s_travel
    a = -s * sa
    b = -g.h0
    c = (g.h0 ** 2 + g.h3 ** 2 + g.s3 ** 2 + s ** 2 - 2.0 * s * g.s3 * ca - g.l ** 2) / (2.0 * g.h3)
    return a, b, c


def closure_roots(a: float, b: float, c: float) -> Tuple[float, float]:
    """Both roots (ELBOW_PLUS, ELBOW_MINUS) of a*sin(x) + b*cos(x) + c = 0."""
    r = math.hypot(a, b)
    if r == 0.0 or abs(c) > r * (1.0 + 1e-12):
        raise NoSolution(f"Closure has no real root: A={a:.6g}, B={b:.6g}, C={c:.6g}")
    phi = math.atan2(a, b)
    spread = math.acos(min(1.0, max(-1.0, -c / r)))
    return normalize_angle(phi + spread), normalize_angle(phi - spread)


def _pick(roots: Tuple[float, float], branch: Branch) -> float:
    return roots[0] if branch == Branch.ELBOW_PLUS else roots[1]


def rssr_solve(g: RssrGeometry, theta1: float, branch: Branch = Branch.ELBOW_PLUS) -> float:
    """Output crank angle theta0 for input angle theta1 on the requested branch."""
    return _pick(closure_roots(*rssr_coefficients(g, theta1)), branch)


def rssr_prismatic_solve(g: RssrGeometry, s_travel: float, branch: Branch = Branch.ELBOW_PLUS) -> float:
    """Output crank angle theta0 for a slider displaced by s_travel from s0."""
    return _pick(closure_roots(*rssr_prismatic_coefficients(g, s_travel)), branch)


def rssr_points(g: RssrGeometry, theta1: float, theta0: float) -> Tuple[np.ndarray, np.ndarray]:
    """Spherical-joint centres B (input) and C (output) in the input-axis frame."""
    b_point = direction_cosine(theta1, 0.0) @ np.array([g.h1, 0.0, g.s0])
    # Output crank frame: offset h0 along x, then the transposed Rz(theta0) Rx(alpha30)
    c_point = np.array([-g.h0, 0.0, 0.0]) + direction_cosine(theta0, g.alpha30).T @ np.array([g.h3, 0.0, g.s3])
    return b_point, c_point


def coupler_error(g: RssrGeometry, theta1: float, theta0: float, s_travel: Optional[float] = None) -> float:
    """|BC| - l. Pass s_travel for a prismatic chain (theta1 is then ignored)."""
    if s_travel is not None:
        g = replace(g, h1=0.0, s0=g.s0 + s_travel)
        theta1 = 0.0
    b_point, c_point = rssr_points(g, theta1, theta0)
    return float(np.linalg.norm(b_point - c_point) - g.l)


# ========== Chains in the Vehicle Frame ==========

def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n <= 1e-12:
        raise ConfigError(f"Cannot normalise a zero-length direction {v.tolist()}")
    return v / n


@dataclass(frozen=True)
class ChainFrame:
    """
    One RSSR chain placed in the vehicle frame.

    input_origin / output_origin are the feet of the common perpendicular on
    the input and output axes; (x, y, e1) is the input frame and (x, v, e3)
    measures the output crank angle.
    """
    geometry: RssrGeometry
    input_origin: np.ndarray
    output_origin: np.ndarray
    x: np.ndarray
    y: np.ndarray
    e1: np.ndarray
    e3: np.ndarray
    v: np.ndarray
    prismatic: bool
    design_input: float
    design_output: float
    branch: Branch

    def input_angle(self, point: np.ndarray) -> float:
        r = point - self.input_origin
        return math.atan2(float(r @ self.y), float(r @ self.x))

    def output_angle(self, point: np.ndarray) -> float:
        r = point - self.output_origin
        return math.atan2(float(r @ self.v), float(r @ self.x))

    def solve(self, value: float) -> float:
        """theta0 for an input angle (revolute) or slider travel (prismatic) on the stored branch."""
        if self.prismatic:
            return rssr_prismatic_solve(self.geometry, value, self.branch)
        return rssr_solve(self.geometry, value, self.branch)

    def output_rotation(self, delta: float) -> np.ndarray:
        """Matrix turning output-body points by delta in the (x, v) plane."""
        basis = np.column_stack([self.x, self.v, self.e3])
        cd, sd = math.cos(delta), math.sin(delta)
        turn = np.array([[cd, -sd, 0.0], [sd, cd, 0.0], [0.0, 0.0, 1.0]])
        return basis @ turn @ basis.T

    def rotate_output(self, points: np.ndarray, delta: float) -> np.ndarray:
        """Carry output-body points through an output crank rotation of delta."""
        points = np.asarray(points, dtype=float)
        if delta == 0.0:
            return points.copy()
        r = points - self.output_origin
        a = r @ self.x
        b = r @ self.v
        c = r @ self.e3
        cd, sd = math.cos(delta), math.sin(delta)
        a_new = a * cd - b * sd
        b_new = a * sd + b * cd
        return (
            self.output_origin
            + np.multiply.outer(a_new, self.x)
            + np.multiply.outer(b_new, self.v)
            + np.multiply.outer(c, self.e3)
        )


def derive_chain(
    input_point: np.ndarray,
    input_dir: np.ndarray,
    output_point: np.ndarray,
    output_dir: np.ndarray,
    crank_in: np.ndarray,
    crank_out: np.ndarray,
    prismatic: bool = False,
    coupler_length: Optional[float] = None,
    design_output: Optional[float] = None,
) -> ChainFrame:
    """
    Build the closure frame of a chain from its two axis lines and crank points.

    Args:
        input_point, input_dir: a point on the input axis and its direction
        output_point, output_dir: same for the output axis
        crank_in: input spherical joint (on the axis for a prismatic input)
        crank_out: output spherical joint
        prismatic: input slides along its axis instead of rotating
        coupler_length: fixed coupler length; defaults to |crank_in - crank_out|
        design_output: angle the branch is matched against; defaults to the
            geometric angle of crank_out

    Returns:
        ChainFrame whose branch closes the chain at the design pose
    """
    e1 = _unit(np.asarray(input_dir, dtype=float))
    e3 = _unit(np.asarray(output_dir, dtype=float))
    if float(e1 @ e3) < 0.0:
        e3 = -e3

    p1 = np.asarray(input_point, dtype=float)
    p3 = np.asarray(output_point, dtype=float)
    w = p1 - p3
    b = float(e1 @ e3)
    d = float(e1 @ w)
    e = float(e3 @ w)
    denom = 1.0 - b * b
    if denom < 1e-12:
        foot_in = p1
        foot_out = p3 + float(e3 @ (p1 - p3)) * e3
    else:
        foot_in = p1 + ((b * e - d) / denom) * e1
        foot_out = p3 + ((e - b * d) / denom) * e3

    gap = foot_in - foot_out
    if np.linalg.norm(gap) > 1e-12:
        x = gap / np.linalg.norm(gap)
    else:
        cross = np.cross(e1, e3)
        if np.linalg.norm(cross) <= 1e-12:
            raise ConfigError("Input and output axes coincide")
        x = cross / np.linalg.norm(cross)
    y = np.cross(e1, x)
    if float(e3 @ y) < 0.0:
        x, y = -x, -y

    alpha = math.atan2(float(e3 @ y), float(e3 @ e1))
    h0 = float(gap @ x)

    r_in = np.asarray(crank_in, dtype=float) - foot_in
    s0 = float(r_in @ e1)
    h1 = 0.0 if prismatic else float(np.linalg.norm(r_in - s0 * e1))

    r_out = np.asarray(crank_out, dtype=float) - foot_out
    s3 = float(r_out @ e3)
    h3 = float(np.linalg.norm(r_out - s3 * e3))
    v = np.cross(x, e3)

    length = float(np.linalg.norm(np.asarray(crank_in) - np.asarray(crank_out))) if coupler_length is None else coupler_length
    geometry = RssrGeometry(h0=h0, h1=h1, h3=h3, l=length, s0=s0, s3=s3, alpha30=alpha)

    if design_output is None:
        design_output = math.atan2(float(r_out @ v), float(r_out @ x))
    design_input = 0.0 if prismatic else math.atan2(float(r_in @ y), float(r_in @ x))
    if prismatic:
        roots = closure_roots(*rssr_prismatic_coefficients(geometry, 0.0))
    else:
        roots = closure_roots(*rssr_coefficients(geometry, design_input))

    gaps = [abs(normalize_angle(root - design_output)) for root in roots]
    branch = Branch.ELBOW_PLUS if gaps[0] <= gaps[1] else Branch.ELBOW_MINUS

    return ChainFrame(
        geometry=geometry,
        input_origin=foot_in,
        output_origin=foot_out,
        x=x,
        y=y,
        e1=e1,
        e3=e3,
        v=v,
        prismatic=prismatic,
        design_input=design_input,
        design_output=_pick(roots, branch),
        branch=branch,
    )


# ========== Suspension Geometry ==========

@dataclass(frozen=True)
class UnsprungBody:
    """Wheel, hub and knuckle as one rigid body."""
    mass: float
    inertia: np.ndarray
    cg: np.ndarray

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"Unsprung mass must be positive, got {self.mass}")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ConfigError("Unsprung inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise ConfigError("Unsprung inertia must be positive-definite")


@dataclass(frozen=True)
class SuspensionGeometry:
    """
    Nominal hard points of one corner plus the derived closure chains.

    Points are in the vehicle frame (x forward, y left, z up) at the design
    pose x_a = x_d = 0.
    """
    name: str
    points: Dict[str, np.ndarray]
    wheel_center: np.ndarray
    contact_point: np.ndarray
    rack_axis: np.ndarray
    body: UnsprungBody
    xa_limits: Tuple[float, float]
    xd_limits: Tuple[float, float]
    damper_chain: ChainFrame
    upper_chain: ChainFrame
    steering_chain: ChainFrame
    tie_rod_length: float
    side: str = "left"
    source: Dict = field(default_factory=dict, repr=False)

    @property
    def damper_length(self) -> float:
        return self.damper_chain.geometry.l

    @property
    def kingpin_length(self) -> float:
        return self.upper_chain.geometry.l

    @classmethod
    def from_model(cls, model: GeometryFile, side: str = "left") -> "SuspensionGeometry":
        errors = validate_geometry(model)
        if errors:
            raise ConfigError(f"Geometry '{model.name}' is invalid\n" + format_validation_report({"geometry": errors}))

        points = {name: np.asarray(model.hard_points[name], dtype=float) for name in HARD_POINT_NAMES}
        body = UnsprungBody(
            mass=model.unsprung.mass,
            inertia=np.asarray(model.unsprung.inertia, dtype=float),
            cg=np.asarray(model.unsprung.cg, dtype=float),
        )
        rack_axis = _unit(np.asarray(model.rack_axis, dtype=float))
        lca_axis = points["l2"] - points["l1"]
        uca_axis = points["u2"] - points["u1"]

        damper = derive_chain(
            points["p2"], lca_axis, points["l1"], lca_axis,
            crank_in=points["p2"], crank_out=points["p1"], prismatic=True,
        )
        upper = derive_chain(
            points["l1"], lca_axis, points["u1"], uca_axis,
            crank_in=points["s3"], crank_out=points["s1"],
        )
        tie_rod = float(np.linalg.norm(points["s2"] - points["t"]))
        steering = derive_chain(
            points["t"], rack_axis, points["s3"], points["s1"] - points["s3"],
            crank_in=points["t"], crank_out=points["s2"], prismatic=True, coupler_length=tie_rod,
        )

        return cls(
            name=model.name,
            points=points,
            wheel_center=np.asarray(model.wheel_center, dtype=float),
            contact_point=np.asarray(model.contact_point, dtype=float),
            rack_axis=rack_axis,
            body=body,
            xa_limits=tuple(model.travel_limits.x_a),
            xd_limits=tuple(model.travel_limits.x_d),
            damper_chain=damper,
            upper_chain=upper,
            steering_chain=steering,
            tie_rod_length=tie_rod,
            side=side,
            source=model.model_dump(),
        )

    def mirrored(self) -> "SuspensionGeometry":
        """Right-hand corner: reflect y. Feed it -x_a for the same rack motion."""
        raw = json.loads(json.dumps(self.source))
        for name, value in raw["hard_points"].items():
            raw["hard_points"][name] = [value[0], -value[1], value[2]]
        for key in ("wheel_center", "contact_point", "rack_axis"):
            raw[key] = [raw[key][0], -raw[key][1], raw[key][2]]
        raw["unsprung"]["cg"] = [raw["unsprung"]["cg"][0], -raw["unsprung"]["cg"][1], raw["unsprung"]["cg"][2]]
        flip = np.diag([1.0, -1.0, 1.0])
        raw["unsprung"]["inertia"] = (flip @ np.asarray(raw["unsprung"]["inertia"]) @ flip).tolist()
        raw["name"] = f"{raw['name']}_mirrored"
        side = "right" if self.side == "left" else "left"
        return SuspensionGeometry.from_model(GeometryFile.model_validate(raw), side=side)


def load_geometry(path) -> SuspensionGeometry:
    """Read and validate a geometry JSON file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Geometry file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise BenchIoError(f"Cannot read geometry file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Geometry file {path} is not valid JSON: {exc}") from exc
    try:
        model = GeometryFile.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"Geometry file {path} failed schema validation:\n{exc}") from exc
    return SuspensionGeometry.from_model(model)


# ========== Hard Points ==========

@dataclass(frozen=True)
class HardPointState:
    """All hard points of one corner at a given rack travel and damper compression."""
    x_a: float
    x_d: float
    points: Dict[str, np.ndarray]
    cg: np.ndarray
    contact_point: np.ndarray
    wheel_center: np.ndarray
    knuckle_rotation: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.points[name]

    def as_array(self) -> np.ndarray:
        return np.vstack([self.points[name] for name in HARD_POINT_NAMES])


def _minimal_rotation(a: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """Smallest rotation taking unit vector a onto unit vector b (None if they agree)."""
    axis = np.cross(a, b)
    sin_angle = float(np.linalg.norm(axis))
    cos_angle = float(a @ b)
    if sin_angle == 0.0 and cos_angle > 0.0:
        return None
    if sin_angle <= 1e-15:
        raise KinematicLockup("Kingpin flipped direction")
    angle = math.atan2(sin_angle, cos_angle)
    return Rotation.from_rotvec(axis / sin_angle * angle).as_matrix()


def hard_points(geom: SuspensionGeometry, x_a: float, x_d: float) -> HardPointState:
    """
    Position every hard point for rack travel x_a and damper compression x_d.

    Raises:
        TravelOutOfRange: inputs outside the geometry's travel window
        KinematicLockup: a submechanism cannot close
    """
    for label, value, (lo, hi) in (("x_a", x_a, geom.xa_limits), ("x_d", x_d, geom.xd_limits)):
        if not (lo - 1e-12 <= value <= hi + 1e-12):
            raise TravelOutOfRange(f"{label}={value:.6g} m outside [{lo}, {hi}]")

    nominal = geom.points
    try:
        # Damper chain: coupler shortens with compression, LCA follows
        damper = geom.damper_chain
        shortened = replace(damper.geometry, l=damper.geometry.l - x_d)
        theta_lca = rssr_prismatic_solve(shortened, 0.0, damper.branch)
        delta_lca = normalize_angle(theta_lca - damper.design_output)
        s3, p1 = damper.rotate_output(np.vstack([nominal["s3"], nominal["p1"]]), delta_lca)

        # Upper chain: LCA crank s3 drives the UCA through the kingpin
        upper = geom.upper_chain
        theta_uca = upper.solve(upper.input_angle(s3))
        delta_uca = normalize_angle(theta_uca - upper.design_output)
        s1 = upper.rotate_output(nominal["s1"], delta_uca)

        # Knuckle reference pose: follow the kingpin with the smallest rotation
        carried = np.vstack([nominal["s2"], geom.body.cg, geom.contact_point, geom.wheel_center])
        align = _minimal_rotation(
            _unit(nominal["s1"] - nominal["s3"]), _unit(s1 - s3)
        )
        if align is None and delta_lca == 0.0:
            reference = carried.copy()
            align = np.eye(3)
        else:
            align = np.eye(3) if align is None else align
            reference = s3 + (carried - nominal["s3"]) @ align.T

        # Steering chain: rack slider sets the knuckle angle about the kingpin
        steering = derive_chain(
            nominal["t"], geom.rack_axis, s3, s1 - s3,
            crank_in=nominal["t"], crank_out=reference[0],
            prismatic=True, coupler_length=geom.tie_rod_length,
        )
        theta_ref = steering.output_angle(reference[0])
        roots = closure_roots(*rssr_prismatic_coefficients(steering.geometry, x_a))
        theta_steer = min(roots, key=lambda root: abs(normalize_angle(root - theta_ref)))
        delta_steer = normalize_angle(theta_steer - theta_ref)
        moved = steering.rotate_output(reference, delta_steer)
        knuckle_rotation = steering.output_rotation(delta_steer) @ align
    except NoSolution as exc:
        raise KinematicLockup(f"Suspension cannot close at x_a={x_a:.6g} m, x_d={x_d:.6g} m: {exc}") from exc

    points = {name: nominal[name].copy() for name in HARD_POINT_NAMES}
    points["t"] = nominal["t"] + x_a * geom.rack_axis if x_a != 0.0 else nominal["t"].copy()
    points["s1"] = s1
    points["s3"] = s3
    points["p1"] = p1
    points["s2"] = moved[0]

    return HardPointState(
        x_a=x_a,
        x_d=x_d,
        points=points,
        cg=moved[1],
        contact_point=moved[2],
        wheel_center=moved[3],
        knuckle_rotation=knuckle_rotation,
    )


def constraint_residuals(geom: SuspensionGeometry, state: HardPointState) -> Dict[str, float]:
    """Signed length errors (m) of every rigid link and body at a solved pose."""
    nominal = geom.points
    p = state.points

    def dist(a: np.ndarray, b: np.ndarray) -> float:
        return float(np.linalg.norm(a - b))

    residuals = {
        "damper": dist(p["p1"], p["p2"]) - (geom.damper_length - state.x_d),
        "tie_rod": dist(p["s2"], p["t"]) - geom.tie_rod_length,
        "rack": dist(p["t"], nominal["t"] + state.x_a * geom.rack_axis),
    }
    for link in (("u1", "s1"), ("u2", "s1"), ("l1", "s3"), ("l2", "s3"), ("l1", "p1"), ("l2", "p1"),
                 ("s1", "s3"), ("s1", "s2"), ("s2", "s3")):
        a, b = link
        residuals[f"{a}-{b}"] = dist(p[a], p[b]) - dist(nominal[a], nominal[b])
    for name, carried, reference in (
        ("cg", state.cg, geom.body.cg),
        ("contact_point", state.contact_point, geom.contact_point),
        ("wheel_center", state.wheel_center, geom.wheel_center),
    ):
        for anchor in ("s1", "s2", "s3"):
            residuals[f"{name}-{anchor}"] = dist(carried, p[anchor]) - dist(reference, nominal[anchor])
    for name in ("u1", "u2", "l1", "l2", "p2"):
        residuals[f"{name}-fixed"] = dist(p[name], nominal[name])
    return residuals


def max_constraint_residual(geom: SuspensionGeometry, state: HardPointState) -> float:
    return max(abs(v) for v in constraint_residuals(geom, state).values())


# ========== Sweeps ==========

@dataclass
class KinematicSweep:
    """Result of a grid sweep over (x_a, x_d)."""
    xa_grid: np.ndarray
    xd_grid: np.ndarray
    residual: np.ndarray
    lockups: List[Tuple[float, float, str]] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        finite = self.residual[np.isfinite(self.residual)]
        return float(finite.max()) if finite.size else float("nan")


def sweep_grid(geom: SuspensionGeometry, n_xa: int, n_xd: int) -> KinematicSweep:
    """Evaluate hard points on an n_xa x n_xd grid; lockups are recorded, not raised."""
    xa_grid = np.linspace(geom.xa_limits[0], geom.xa_limits[1], n_xa)
    xd_grid = np.linspace(geom.xd_limits[0], geom.xd_limits[1], n_xd)
    residual = np.full((n_xa, n_xd), np.nan)
    lockups = []
    for i, x_a in enumerate(xa_grid):
        for j, x_d in enumerate(xd_grid):
            try:
                state = hard_points(geom, float(x_a), float(x_d))
            except KinematicLockup as exc:
                lockups.append((float(x_a), float(x_d), str(exc)))
                continue
            residual[i, j] = max_constraint_residual(geom, state)
    return KinematicSweep(xa_grid=xa_grid, xd_grid=xd_grid, residual=residual, lockups=lockups)


def wheel_travel_table(geom: SuspensionGeometry, n: int = 61) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Damper compression grid, matching vertical wheel travel and motion ratio.

    Returns:
        (x_d, w, motion_ratio) with w the contact-point rise at x_a = 0 and
        motion_ratio = dx_d/dw
    """
    xd = np.linspace(geom.xd_limits[0], geom.xd_limits[1], n)
    z0 = geom.contact_point[2]
    w = np.array([hard_points(geom, 0.0, float(x)).contact_point[2] - z0 for x in xd])
    if np.any(np.diff(w) <= 0):
        raise ConfigError("Wheel travel is not monotonic in damper compression")
    return xd, w, np.gradient(xd, w)
