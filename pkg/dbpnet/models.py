# -*- coding: utf-8 -*-
"""
Pydantic models for configuration, geometry files and report rows.
These enforce typed handoffs between the generate / train / eval stages.
"""

import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


CORNERS: Tuple[str, ...] = ("fl", "fr", "rl", "rr")

HARD_POINT_NAMES: Tuple[str, ...] = ("u1", "u2", "l1", "l2", "p1", "p2", "t", "s1", "s2", "s3")

# Formula Student car the defaults describe (SI units)
VEHICLE_PROFILE = {
    "sprung_mass": 248.0,
    "unsprung_mass": 9.0,
    "wheelbase": 1.600,
    "track_front": 1.240,
    "track_rear": 1.234,
    "cg_height": 0.320,
    "cg_to_front": 0.862,
    "stiffness_front": 78_000.0,
    "stiffness_rear": 100_000.0,
    "damper_low": 500.0,
    "damper_high": 4_500.0,
}

# Sensor full-scale ranges; noise defaults are a fraction of these
SENSOR_FULL_SCALE = {
    "delta": math.pi,           # steering wheel +-180 deg
    "a_spr": 10.0 * 9.81,       # accelerometers +-10 g
    "a_unspr": 10.0 * 9.81,
    "d_sus": 0.110,             # displacement sensor 110 mm
    "F_p": 100.0 * 9.81,        # load cell 100 kg
}

NOISE_FRACTION = 0.005

DEFAULT_SCENARIOS: List[str] = [
    "urban_stop_and_go",
    "urban_turns",
    "rural_winding",
    "rural_rough_road",
    "highway_cruise",
    "highway_lane_change",
    "emergency_braking",
    "obstacle_avoidance",
    "distracted_swerve",
    "brake_in_turn",
]


# ========== Geometry File ==========

class UnsprungSpec(BaseModel):
    """Wheel, hub and knuckle lumped as one rigid body."""
    model_config = ConfigDict(extra="forbid")

    mass: float = Field(..., gt=0, description="Unsprung mass per corner (kg)")
    inertia: List[List[float]] = Field(..., description="3x3 inertia about the CG, body axes (kg m^2)")
    cg: List[float] = Field(..., min_length=3, max_length=3, description="CG at design pose (m)")


class TravelLimits(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x_a: Tuple[float, float] = Field((-0.03, 0.03), description="Rack travel window (m)")
    x_d: Tuple[float, float] = Field((-0.03, 0.03), description="Damper compression window (m)")

    @model_validator(mode="after")
    def _ordered(self):
        for name, (lo, hi) in (("x_a", self.x_a), ("x_d", self.x_d)):
            if not lo < hi:
                raise ValueError(f"travel window {name} must satisfy low < high, got ({lo}, {hi})")
        return self


class ChainSpec(BaseModel):
    """Which hard points drive one closure submechanism."""
    model_config = ConfigDict(extra="forbid")

    kind: str = Field(..., pattern="^(revolute|prismatic)$")
    input: str = Field(..., description="Input joint: a hard point or an axis 'a-b'")
    output_axis: str = Field(..., description="Output revolute axis as 'a-b'")
    output_point: str = Field(..., description="Spherical joint carried by the output crank")
    coupler_length: Optional[float] = Field(
        None, description="Declared coupler length (m); derived from hard points when null"
    )


class GeometryFile(BaseModel):
    """Versioned suspension geometry document (vehicle frame: x forward, y left, z up)."""
    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "format_version": 1,
                "name": "fsae_front_v1",
                "hard_points": {"u1": [0.12, 0.30, 0.30]},
                "travel_limits": {"x_a": [-0.03, 0.03], "x_d": [-0.03, 0.03]},
            }
        },
    )

    format_version: int = Field(1, ge=1)
    name: str
    description: str = ""
    hard_points: Dict[str, List[float]]
    wheel_center: List[float] = Field(..., min_length=3, max_length=3)
    contact_point: List[float] = Field(..., min_length=3, max_length=3)
    rack_axis: List[float] = Field([0.0, 1.0, 0.0], min_length=3, max_length=3)
    unsprung: UnsprungSpec
    travel_limits: TravelLimits = Field(default_factory=TravelLimits)
    chains: Dict[str, ChainSpec] = Field(default_factory=dict)

    @field_validator("hard_points")
    @classmethod
    def _all_points(cls, points: Dict[str, List[float]]) -> Dict[str, List[float]]:
        missing = [name for name in HARD_POINT_NAMES if name not in points]
        if missing:
            raise ValueError(f"missing hard points: {missing}")
        for name, value in points.items():
            if len(value) != 3:
                raise ValueError(f"hard point '{name}' must have 3 coordinates")
        return points


# ========== Run Configuration ==========

class VehicleParams(BaseModel):
    """Full-vehicle parameters used by the plant and the quarter-car prior."""
    model_config = ConfigDict(extra="forbid")

    sprung_mass: float = Field(VEHICLE_PROFILE["sprung_mass"], gt=0, description="kg")
    unsprung_mass: float = Field(VEHICLE_PROFILE["unsprung_mass"], gt=0, description="kg per corner")
    wheelbase: float = Field(VEHICLE_PROFILE["wheelbase"], gt=0, description="m")
    track_front: float = Field(VEHICLE_PROFILE["track_front"], gt=0, description="m")
    track_rear: float = Field(VEHICLE_PROFILE["track_rear"], gt=0, description="m")
    cg_height: float = Field(VEHICLE_PROFILE["cg_height"], gt=0, description="Whole-vehicle CG height (m)")
    unsprung_cg_height: float = Field(0.228, gt=0, description="Wheel-center height (m)")
    cg_to_front: float = Field(VEHICLE_PROFILE["cg_to_front"], gt=0, description="m")
    stiffness_front: float = Field(VEHICLE_PROFILE["stiffness_front"], gt=0, description="Wheel rate N/m")
    stiffness_rear: float = Field(VEHICLE_PROFILE["stiffness_rear"], gt=0, description="Wheel rate N/m")
    damper_low: float = Field(VEHICLE_PROFILE["damper_low"], gt=0, description="High-speed slope N s/m")
    damper_high: float = Field(VEHICLE_PROFILE["damper_high"], gt=0, description="Low-speed slope N s/m")
    damper_knee: float = Field(0.05, gt=0, description="Knee velocity of the digressive map (m/s)")
    tire_stiffness: float = Field(1.0e5, gt=0, description="N/m")
    roll_inertia: float = Field(20.0, gt=0, description="kg m^2")
    pitch_inertia: float = Field(80.0, gt=0, description="kg m^2")
    steering_ratio: float = Field(5.0, gt=0, description="Steering wheel to road wheel")
    rack_per_rad: float = Field(0.012, gt=0, description="Rack travel per steering-wheel radian (m)")
    max_lateral_accel: float = Field(13.7, gt=0, description="Tire saturation (m/s^2)")
    gravity: float = Field(9.81, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.cg_to_front >= self.wheelbase:
            raise ValueError("cg_to_front must be shorter than the wheelbase")
        if self.damper_high < self.damper_low:
            raise ValueError("damper_high must not be below damper_low")
        if 4.0 * self.unsprung_mass * self.unsprung_cg_height >= self.total_mass * self.cg_height:
            raise ValueError("unsprung masses sit too high for the given CG height")
        return self

    @property
    def total_mass(self) -> float:
        return self.sprung_mass + 4.0 * self.unsprung_mass

    @property
    def cg_to_rear(self) -> float:
        return self.wheelbase - self.cg_to_front

    @property
    def sprung_cg_height(self) -> float:
        return (self.total_mass * self.cg_height - 4.0 * self.unsprung_mass * self.unsprung_cg_height) / self.sprung_mass


class NoiseConfig(BaseModel):
    """Per-channel Gaussian sensor noise (standard deviations)."""
    model_config = ConfigDict(extra="forbid")

    delta: float = Field(NOISE_FRACTION * SENSOR_FULL_SCALE["delta"], ge=0, description="rad")
    a_spr: float = Field(NOISE_FRACTION * SENSOR_FULL_SCALE["a_spr"], ge=0, description="m/s^2")
    a_unspr: float = Field(NOISE_FRACTION * SENSOR_FULL_SCALE["a_unspr"], ge=0, description="m/s^2")
    d_sus: float = Field(NOISE_FRACTION * SENSOR_FULL_SCALE["d_sus"], ge=0, description="m")
    dd_sus: float = Field(0.005, ge=0, description="m/s")
    F_p: float = Field(NOISE_FRACTION * SENSOR_FULL_SCALE["F_p"], ge=0, description="N")
    seed: int = Field(0, ge=0)


class PlantConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: float = Field(1.0e-3, gt=0, le=0.05, description="Integrator step (s)")
    output_period: float = Field(0.05, gt=0, description="Sample period of emitted data (s)")
    state_bound: float = Field(1.0e3, gt=0, description="Max state norm before divergence")
    collocation_count: int = Field(1000, ge=0, description="Physics collocation rows N_f")
    grid_points: int = Field(21, ge=3, description="Linkage lookup grid per axis")
    workers: int = Field(1, ge=1, description="Parallel scenario simulations")


class ScenarioSelection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    names: List[str] = Field(default_factory=lambda: list(DEFAULT_SCENARIOS))


class SplitConfig(BaseModel):
    """Scenario-level split, either by name lists or by counts in selection order."""
    model_config = ConfigDict(extra="forbid")

    train: List[str] = Field(default_factory=list)
    validation: List[str] = Field(default_factory=list)
    test: List[str] = Field(default_factory=list)
    counts: Optional[Dict[str, int]] = Field(None, description="e.g. {'train': 8, 'validation': 1, 'test': 1}")

    @field_validator("counts")
    @classmethod
    def _count_keys(cls, counts: Optional[Dict[str, int]]) -> Optional[Dict[str, int]]:
        if counts is None:
            return counts
        if set(counts) != {"train", "validation", "test"}:
            raise ValueError("counts needs exactly the keys train, validation, test")
        if any(v < 0 for v in counts.values()):
            raise ValueError("split counts must be non-negative")
        return counts


class TrainConfig(BaseModel):
    """Hyperparameters of the DBPnet / PINN training loop."""
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(60, ge=1)
    batch_size: int = Field(64, ge=1)
    mc_samples: int = Field(2, ge=1, description="K weight samples per step")
    posterior_samples: int = Field(50, ge=1, description="S samples at inference")
    learning_rate: float = Field(1.0e-3, gt=0)
    sigma_n: float = Field(1.0, ge=0, description="NS-dropout noise scale")
    w_d: float = Field(200.0, ge=0, description="Data loss weight")
    w_p: float = Field(20.0, ge=0, description="Physics loss weight")
    prior_std: float = Field(1.0, gt=0)
    seed: int = Field(0, ge=0)
    n_layers: int = Field(4, ge=1)
    width: int = Field(64, ge=1)
    dpc_layers: int = Field(2, ge=1)
    dpc_width: int = Field(64, ge=1)
    rho_init: Tuple[float, float] = Field((-5.0, -4.0))
    film_init_scale: float = Field(1.0e-3, ge=0, description="Std of the FiLM head weights at init")


class EkfConfig(BaseModel):
    """Per-corner quarter-car EKF; state order [z_s, zdot_s, z_u, zdot_u]."""
    model_config = ConfigDict(extra="forbid")

    process_std: List[float] = Field([1.0e-5, 2.0e-3, 1.0e-5, 5.0e-2], min_length=4, max_length=4)
    measurement_std: List[float] = Field(
        [
            NOISE_FRACTION * SENSOR_FULL_SCALE["d_sus"],
            0.005,
            NOISE_FRACTION * SENSOR_FULL_SCALE["a_spr"],
            NOISE_FRACTION * SENSOR_FULL_SCALE["a_unspr"],
        ],
        min_length=4,
        max_length=4,
        description="d_sus, dd_sus, a_spr, a_unspr",
    )
    initial_std: List[float] = Field([0.01, 0.1, 0.01, 0.1], min_length=4, max_length=4)
    substeps: int = Field(50, ge=1)
    iterations: int = Field(3, ge=1, description="Relinearizations per measurement update")

    @field_validator("process_std", "measurement_std", "initial_std")
    @classmethod
    def _non_negative(cls, values: List[float]) -> List[float]:
        if any(v < 0 for v in values):
            raise ValueError("standard deviations must be non-negative")
        return values


class KincheckConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_xa: int = Field(21, ge=2)
    n_xd: int = Field(21, ge=2)
    tolerance: float = Field(1.0e-9, gt=0, description="Max closure residual (m)")


class AblationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    variants: List[str] = Field(default_factory=lambda: ["Full", "NoPhysicsLoss", "NoBayesian", "NoDPC"])
    workers: int = Field(1, ge=1)


class ReportConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    plots: bool = True
    max_plot_samples: int = Field(400, ge=10)


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    geometry: str = "../data/geometry/fsae_front_v1.json"
    dataset_dir: str = "../data/dataset"
    output_dir: str = "../runs/default"


class RunConfig(BaseModel):
    """One JSON document configuring every bench command."""
    model_config = ConfigDict(extra="forbid")

    paths: PathsConfig = Field(default_factory=PathsConfig)
    vehicle: VehicleParams = Field(default_factory=VehicleParams)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    plant: PlantConfig = Field(default_factory=PlantConfig)
    scenarios: ScenarioSelection = Field(default_factory=ScenarioSelection)
    split: SplitConfig = Field(default_factory=SplitConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    ekf: EkfConfig = Field(default_factory=EkfConfig)
    kincheck: KincheckConfig = Field(default_factory=KincheckConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    report: ReportConfig = Field(default_factory=ReportConfig)


# ========== Report Rows ==========

class ReportRow(BaseModel):
    """One metrics line: one (method, variant, class, split, seed)."""

    method: str
    variant: str = "Full"
    scenario_class: str = Field(..., description="NormalDriving, EmergencyDriving, TrackTest or All")
    split: str
    seed: int
    rmse: float = Field(..., ge=0)
    max_error: float = Field(..., ge=0)
    rmse_fl: float = 0.0
    rmse_fr: float = 0.0
    rmse_rl: float = 0.0
    rmse_rr: float = 0.0
    max_error_fl: float = 0.0
    max_error_fr: float = 0.0
    max_error_rl: float = 0.0
    max_error_rr: float = 0.0
    reference: bool = False
    wall_clock_s: float = Field(0.0, ge=0, description="Kept out of the metrics CSV")
