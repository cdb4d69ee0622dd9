# -*- coding: utf-8 -*-
"""
Quasi-static force and moment balance of the unsprung body, and the
quarter-car force model used as the physics prior.

Sign convention: every link force acts on the unsprung body along the
chassis-to-knuckle direction of its link (positive = compression). The
balance is written in d'Alembert form about the unsprung CG:

    sum(F_links) + F_tire + m_u * g - m_u * a_u = 0
    sum(r_i x F_i) + r_c x F_tire + M_align - I_u * beta_u = 0
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from dbpnet.channels import SensorSample, WheelLoads
from dbpnet.kinematics import HardPointState, SuspensionGeometry, UnsprungBody, hard_points
from dbpnet.models import CORNERS, VehicleParams
from dbpnet.validation import ConfigError, DegenerateLink, SingularConfiguration


GRAVITY = np.array([0.0, 0.0, -9.81])

LINKS: Tuple[str, ...] = ("p", "u1", "u2", "t", "l1", "l2")

# (chassis side, knuckle side) of every two-force member
LINK_ENDPOINTS: Dict[str, Tuple[str, str]] = {
    "p": ("p2", "p1"),
    "u1": ("u1", "s1"),
    "u2": ("u2", "s1"),
    "t": ("t", "s2"),
    "l1": ("l1", "s3"),
    "l2": ("l2", "s3"),
}

CONDITION_LIMIT = 1.0e12


@dataclass(frozen=True)
class KinematicInputs:
    """Pose, rates and measured pushrod force for one equilibrium solve."""
    x_a: float
    x_d: float
    xd_dot: float = 0.0
    a_u: np.ndarray = field(default_factory=lambda: np.zeros(3))
    beta_u: np.ndarray = field(default_factory=lambda: np.zeros(3))
    F_p: float = 0.0


@dataclass(frozen=True)
class TireForces:
    F_x: float
    F_y: float
    F_z: float
    M_x: float
    M_y: float
    M_z: float
    contact_point: np.ndarray


@dataclass(frozen=True)
class LinkForceSolution:
    """Link force magnitudes with their vectors and moments about the CG."""
    magnitudes: Dict[str, float]
    forces: Dict[str, np.ndarray]
    moments: Dict[str, np.ndarray]
    condition: float

    def __getattr__(self, name: str) -> float:
        if name.startswith("F_") and name[2:] in LINKS:
            return self.magnitudes[name[2:]]
        raise AttributeError(name)


def link_directions(hp: HardPointState) -> Dict[str, np.ndarray]:
    """Unit vectors p2->p1, u1->s1, u2->s1, t->s2, l1->s3, l2->s3."""
    directions = {}
    for link, (start, end) in LINK_ENDPOINTS.items():
        span = hp[end] - hp[start]
        length = np.linalg.norm(span)
        if length <= 1e-9:
            raise DegenerateLink(f"Link '{link}' endpoints {start} and {end} coincide")
        directions[link] = span / length
    return directions


def lever_arms(hp: HardPointState) -> Dict[str, np.ndarray]:
    """CG-to-chassis-attachment vectors (p2, u1, u2, t, l1, l2)."""
    return {link: hp[start] - hp.cg for link, (start, _) in LINK_ENDPOINTS.items()}


def link_moments(hp: HardPointState, forces: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """M_i = r_i x F_i about the unsprung CG."""
    arms = lever_arms(hp)
    return {link: np.cross(arms[link], forces[link]) for link in forces}


def solve_link_forces(
    directions: np.ndarray,
    arms: np.ndarray,
    tire_direction: np.ndarray,
    contact_arm: np.ndarray,
    F_p: float,
    external_force: np.ndarray,
    external_moment: np.ndarray,
    aligning: np.ndarray = None,
) -> Tuple[np.ndarray, float, float]:
    """
    Frame-free core of the equilibrium solve.

    Args:
        directions: (6, 3) link unit vectors, pushrod first
        arms: (6, 3) lever arms matching directions
        tire_direction: tire force per unit F_z, (c_x, c_y, 1) in the vehicle frame
        contact_arm: CG-to-contact vector
        F_p: measured pushrod force
        external_force: m_u * (g - a_u)
        external_moment: -I_u @ beta_u
        aligning: moment per unit F_z added by the tire (zeros if None)

    Returns:
        (magnitudes of the five unknown links, F_z, condition number)
    """
    aligning = np.zeros(3) if aligning is None else np.asarray(aligning, dtype=float)
    matrix = np.zeros((6, 6))
    for j in range(1, 6):
        matrix[:3, j - 1] = directions[j]
        matrix[3:, j - 1] = np.cross(arms[j], directions[j])
    matrix[:3, 5] = tire_direction
    matrix[3:, 5] = np.cross(contact_arm, tire_direction) + aligning

    pushrod = F_p * directions[0]
    rhs = -np.concatenate([pushrod + external_force, np.cross(arms[0], pushrod) + external_moment])

    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularConfiguration(f"Equilibrium matrix condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}")
    solution = np.linalg.solve(matrix, rhs)
    return solution[:5], float(solution[5]), condition


def solve_equilibrium(
    hp: HardPointState,
    body: UnsprungBody,
    kin: KinematicInputs,
    slip: Tuple[float, float] = (0.0, 0.0),
    gravity: np.ndarray = GRAVITY,
    aligning: float = 0.0,
) -> Tuple[LinkForceSolution, TireForces]:
    """
    Link forces and tire load that hold the unsprung body in dynamic balance.

    Raises:
        DegenerateLink: a link has zero length
        SingularConfiguration: the 6x6 system is ill-conditioned
    """
    directions = link_directions(hp)
    arms = lever_arms(hp)
    c_x, c_y = slip
    tire_direction = np.array([c_x, c_y, 1.0])
    contact_arm = hp.contact_point - hp.cg
    inertia = hp.knuckle_rotation @ body.inertia @ hp.knuckle_rotation.T

    external_force = body.mass * (np.asarray(gravity, dtype=float) - np.asarray(kin.a_u, dtype=float))
    external_moment = -inertia @ np.asarray(kin.beta_u, dtype=float)

    unknown, F_z, condition = solve_link_forces(
        np.vstack([directions[link] for link in LINKS]),
        np.vstack([arms[link] for link in LINKS]),
        tire_direction,
        contact_arm,
        kin.F_p,
        external_force,
        external_moment,
        aligning=np.array([0.0, 0.0, aligning]),
    )

    magnitudes = {"p": float(kin.F_p)}
    magnitudes.update({link: float(value) for link, value in zip(LINKS[1:], unknown)})
    forces = {link: magnitudes[link] * directions[link] for link in LINKS}
    moments = link_moments(hp, forces)

    tire_force = F_z * tire_direction
    tire_moment = np.cross(contact_arm, tire_force) + np.array([0.0, 0.0, aligning * F_z])
    tire = TireForces(
        F_x=float(tire_force[0]),
        F_y=float(tire_force[1]),
        F_z=F_z,
        M_x=float(tire_moment[0]),
        M_y=float(tire_moment[1]),
        M_z=float(tire_moment[2]),
        contact_point=hp.contact_point.copy(),
    )
    return LinkForceSolution(magnitudes=magnitudes, forces=forces, moments=moments, condition=condition), tire


def equilibrium_residual(
    hp: HardPointState,
    body: UnsprungBody,
    kin: KinematicInputs,
    solution: LinkForceSolution,
    tire: TireForces,
    gravity: np.ndarray = GRAVITY,
) -> Tuple[np.ndarray, np.ndarray]:
    """Force and moment imbalance left by a solution (both should vanish)."""
    inertia = hp.knuckle_rotation @ body.inertia @ hp.knuckle_rotation.T
    tire_force = np.array([tire.F_x, tire.F_y, tire.F_z])
    force = (
        sum(solution.forces.values())
        + tire_force
        + body.mass * np.asarray(gravity, dtype=float)
        - body.mass * np.asarray(kin.a_u, dtype=float)
    )
    moment = (
        sum(solution.moments.values())
        + np.array([tire.M_x, tire.M_y, tire.M_z])
        - inertia @ np.asarray(kin.beta_u, dtype=float)
    )
    return force, moment


def wheel_load_oracle(
    geom: SuspensionGeometry,
    body: UnsprungBody,
    kin: KinematicInputs,
    slip: Tuple[float, float] = (0.0, 0.0),
    gravity: np.ndarray = GRAVITY,
) -> float:
    """Vertical tire load from pose and measured pushrod force."""
    hp = hard_points(geom, kin.x_a, kin.x_d)
    _, tire = solve_equilibrium(hp, body, kin, slip, gravity)
    return tire.F_z


def load_gain(hp: HardPointState, body: UnsprungBody, slip: Tuple[float, float] = (0.0, 0.0)) -> float:
    """dF_z/dF_p at a fixed pose (the system is linear in F_p)."""
    unit = KinematicInputs(x_a=hp.x_a, x_d=hp.x_d, F_p=1.0)
    _, tire = solve_equilibrium(hp, body, unit, slip, gravity=np.zeros(3))
    return tire.F_z


def static_pushrod_preload(
    hp: HardPointState,
    body: UnsprungBody,
    target_load: float,
    slip: Tuple[float, float] = (0.0, 0.0),
    gravity: np.ndarray = GRAVITY,
) -> float:
    """Pushrod force that makes the static tire load equal target_load."""
    at_rest = KinematicInputs(x_a=hp.x_a, x_d=hp.x_d, F_p=0.0)
    _, tire = solve_equilibrium(hp, body, at_rest, slip, gravity)
    gain = load_gain(hp, body, slip)
    if abs(gain) < 1e-12:
        raise SingularConfiguration("Pushrod force has no effect on the tire load at this pose")
    return (target_load - tire.F_z) / gain


def equilibrium_condition(hp: HardPointState, body: UnsprungBody, slip: Tuple[float, float] = (0.0, 0.0)) -> float:
    """Condition number of the equilibrium matrix at a pose."""
    solution, _ = solve_equilibrium(hp, body, KinematicInputs(x_a=hp.x_a, x_d=hp.x_d), slip, gravity=np.zeros(3))
    return solution.condition


# ========== Quarter-Car Prior ==========

@dataclass(frozen=True)
class QuarterCarParams:
    """
    Quarter-car prior F = F0 + k*d_sus + c*dd_sus + m_unspr*a_unspr.

    k and c act on damper compression and its rate, so they already carry the
    motion ratio.
    """
    m_spr: float
    m_unspr: float
    k_f: float
    k_r: float
    c_f: float
    c_r: float
    F0_f: float
    F0_r: float

    def __post_init__(self):
        for name in ("m_spr", "m_unspr", "k_f", "k_r", "c_f", "c_r", "F0_f", "F0_r"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Quarter-car parameter {name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_vehicle(cls, vehicle: VehicleParams, motion_ratio_front: float, motion_ratio_rear: float) -> "QuarterCarParams":
        """Derive the prior from vehicle data and the design-pose motion ratios (dx_d/dw)."""
        g = vehicle.gravity
        front_share = vehicle.cg_to_rear / vehicle.wheelbase
        c_eff = 0.5 * (vehicle.damper_low + vehicle.damper_high)
        return cls(
            m_spr=vehicle.sprung_mass / 4.0,
            m_unspr=vehicle.unsprung_mass,
            k_f=vehicle.stiffness_front / motion_ratio_front,
            k_r=vehicle.stiffness_rear / motion_ratio_rear,
            c_f=c_eff * motion_ratio_front,
            c_r=c_eff * motion_ratio_rear,
            F0_f=vehicle.sprung_mass * g * front_share / 2.0 + vehicle.unsprung_mass * g,
            F0_r=vehicle.sprung_mass * g * (1.0 - front_share) / 2.0 + vehicle.unsprung_mass * g,
        )

    def static_load(self, corner: str) -> float:
        return self.F0_f if corner in ("fl", "fr") else self.F0_r

    def stiffness(self, corner: str) -> float:
        return self.k_f if corner in ("fl", "fr") else self.k_r

    def damping(self, corner: str) -> float:
        return self.c_f if corner in ("fl", "fr") else self.c_r

    def corner_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(F0, k, c) as length-4 arrays in fl, fr, rl, rr order."""
        return (
            np.array([self.static_load(c) for c in CORNERS]),
            np.array([self.stiffness(c) for c in CORNERS]),
            np.array([self.damping(c) for c in CORNERS]),
        )


def quarter_car_force(d_sus: np.ndarray, dd_sus: np.ndarray, a_unspr: np.ndarray, q: QuarterCarParams) -> np.ndarray:
    """Model load for all four corners; inputs are (n, 4)."""
    F0, k, c = q.corner_arrays()
    return F0 + k * np.asarray(d_sus) + c * np.asarray(dd_sus) + q.m_unspr * np.asarray(a_unspr)


def quarter_car_residual(sample: SensorSample, pred: WheelLoads, q: QuarterCarParams, corner: str) -> np.ndarray:
    """pred minus the quarter-car model load at one corner, per time step."""
    if corner not in CORNERS:
        raise ValueError(f"Unknown corner '{corner}', expected one of {CORNERS}")
    i = CORNERS.index(corner)
    model = (
        q.static_load(corner)
        + q.stiffness(corner) * sample.d_sus[:, i]
        + q.damping(corner) * sample.dd_sus[:, i]
        + q.m_unspr * sample.a_unspr[:, i]
    )
    return pred.values[:, i] - model
