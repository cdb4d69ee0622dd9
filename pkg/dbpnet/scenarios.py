# -*- coding: utf-8 -*-
"""
Scripted driving scenarios for the synthetic plant.

Each scenario is a set of piecewise-linear knots for vehicle speed and
steering-wheel angle plus a seeded random road. The library groups them into
NormalDriving (urban / rural / highway), EmergencyDriving (avoidance,
braking, swerve-and-recover) and TrackTest (closed-course loops, opt-in).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dbpnet.validation import ConfigError


NORMAL = "NormalDriving"
EMERGENCY = "EmergencyDriving"
TRACK = "TrackTest"
SCENARIO_CLASSES = (NORMAL, EMERGENCY, TRACK)

# Road height fades in over this distance so every run starts at rest on a flat road
ROAD_FADE_IN = 5.0


@dataclass(frozen=True)
class RoadBump:
    """Raised-cosine bump (negative height for a pothole)."""
    position: float
    height: float
    length: float
    side: str = "both"

    def __post_init__(self):
        if self.side not in ("left", "right", "both"):
            raise ConfigError(f"Bump side must be left, right or both, got '{self.side}'")
        if not self.length > 0:
            raise ConfigError(f"Bump length must be positive, got {self.length}")

    def height_at(self, s: np.ndarray) -> np.ndarray:
        u = (np.asarray(s) - self.position) / self.length
        inside = (u >= 0.0) & (u <= 1.0)
        return np.where(inside, 0.5 * self.height * (1.0 - np.cos(2.0 * np.pi * u)), 0.0)


@dataclass(frozen=True)
class RoadSurface:
    """Left and right road height as functions of travelled distance."""
    s_knots: np.ndarray
    left: np.ndarray
    right: np.ndarray
    bumps: Tuple[RoadBump, ...] = ()

    def height(self, s: np.ndarray, side: str) -> np.ndarray:
        profile = self.left if side == "left" else self.right
        z = np.interp(s, self.s_knots, profile)
        for bump in self.bumps:
            if bump.side in (side, "both"):
                z = z + bump.height_at(s)
        return z


@dataclass(frozen=True)
class ScenarioProfile:
    """
    A scripted maneuver.

    speed_knots and steer_knots are (time s, value) pairs; values hold their
    last knot beyond the final time. Steering is the steering-wheel angle in
    radians.
    """
    name: str
    scenario_class: str
    duration: float
    speed_knots: Tuple[Tuple[float, float], ...]
    steer_knots: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    roughness: float = 0.002
    road_spacing: float = 0.5
    road_seed: int = 0
    bumps: Tuple[RoadBump, ...] = ()
    description: str = ""

    def __post_init__(self):
        if self.scenario_class not in SCENARIO_CLASSES:
            raise ConfigError(f"Scenario '{self.name}' has unknown class '{self.scenario_class}'")
        if not self.duration > 0:
            raise ConfigError(f"Scenario '{self.name}' needs a positive duration")
        for label, knots in (("speed", self.speed_knots), ("steering", self.steer_knots)):
            if not knots:
                raise ConfigError(f"Scenario '{self.name}' has no {label} knots")
            times = [k[0] for k in knots]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigError(f"Scenario '{self.name}' {label} knot times must increase")
        if any(v < 0 for _, v in self.speed_knots):
            raise ConfigError(f"Scenario '{self.name}' has negative speed")
        if self.roughness < 0 or not self.road_spacing > 0:
            raise ConfigError(f"Scenario '{self.name}' has an invalid road description")

    # ----- speed and steering -----

    def _knot_arrays(self, knots) -> Tuple[np.ndarray, np.ndarray]:
        times = np.array([k[0] for k in knots], dtype=float)
        values = np.array([k[1] for k in knots], dtype=float)
        return times, values

    def speed(self, t) -> np.ndarray:
        times, values = self._knot_arrays(self.speed_knots)
        return np.interp(t, times, values)

    def steering(self, t) -> np.ndarray:
        times, values = self._knot_arrays(self.steer_knots)
        return np.interp(t, times, values)

    def accel_x(self, t, h: float = 0.05) -> np.ndarray:
        """Longitudinal acceleration from a centred difference of the speed knots."""
        t = np.asarray(t, dtype=float)
        return (self.speed(t + h) - self.speed(np.maximum(t - h, 0.0))) / (t + h - np.maximum(t - h, 0.0))

    def distance(self, t) -> np.ndarray:
        """Distance travelled since t = 0 (exact for piecewise-linear speed)."""
        times, values = self._knot_arrays(self.speed_knots)
        if times[0] > 0.0:
            times = np.concatenate([[0.0], times])
            values = np.concatenate([[values[0]], values])
        times = np.concatenate([times, [max(times[-1], float(np.max(t)) if np.size(t) else 0.0) + 1.0]])
        values = np.concatenate([values, [values[-1]]])
        segment = np.diff(times)
        slope = np.diff(values) / segment
        cumulative = np.concatenate([[0.0], np.cumsum(values[:-1] * segment + 0.5 * slope * segment ** 2)])

        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(segment) - 1)
        tau = t - times[k]
        return cumulative[k] + values[k] * tau + 0.5 * slope[k] * tau ** 2

    # ----- road -----

    def road(self, wheelbase: float) -> RoadSurface:
        """Seeded road long enough for the rear axle to start behind the front."""
        length = float(self.distance(np.array([self.duration]))[0])
        s_knots = np.arange(-wheelbase - self.road_spacing, length + 2.0 * self.road_spacing, self.road_spacing)
        rng = np.random.default_rng(self.road_seed)
        fade = np.clip(s_knots / ROAD_FADE_IN, 0.0, 1.0)
        left = rng.normal(0.0, self.roughness, s_knots.shape) * fade
        right = rng.normal(0.0, self.roughness, s_knots.shape) * fade
        return RoadSurface(s_knots=s_knots, left=left, right=right, bumps=self.bumps)

    def road_heights(self, t, wheelbase: float, surface: Optional[RoadSurface] = None) -> np.ndarray:
        """(n, 4) road height under fl, fr, rl, rr; rear wheels trail by one wheelbase."""
        surface = surface or self.road(wheelbase)
        s = self.distance(np.atleast_1d(t))
        rear = s - wheelbase
        return np.column_stack([
            surface.height(s, "left"),
            surface.height(s, "right"),
            surface.height(rear, "left"),
            surface.height(rear, "right"),
        ])


# ========== Builders ==========

def constant_speed(name: str, speed: float, duration: float, scenario_class: str = NORMAL, **kwargs) -> ScenarioProfile:
    """Straight line at fixed speed."""
    return ScenarioProfile(
        name=name,
        scenario_class=scenario_class,
        duration=duration,
        speed_knots=((0.0, speed),),
        **kwargs,
    )


def steady_turn(name: str, speed: float, steer: float, duration: float, scenario_class: str = NORMAL, **kwargs) -> ScenarioProfile:
    """Constant speed and steering-wheel angle from t = 0."""
    return ScenarioProfile(
        name=name,
        scenario_class=scenario_class,
        duration=duration,
        speed_knots=((0.0, speed),),
        steer_knots=((0.0, steer),),
        **kwargs,
    )


def _alternating(start: float, period: float, amplitude: float, count: int, ramp: float) -> Tuple[Tuple[float, float], ...]:
    knots = [(0.0, 0.0), (start, 0.0)]
    t = start
    for i in range(count):
        sign = 1.0 if i % 2 == 0 else -1.0
        knots.append((t + ramp, sign * amplitude))
        knots.append((t + period - ramp, sign * amplitude))
        t += period
    knots.append((t + ramp, 0.0))
    return tuple(knots)


def _default_scenarios() -> List[ScenarioProfile]:
    return [
        ScenarioProfile(
            name="urban_stop_and_go",
            scenario_class=NORMAL,
            duration=30.0,
            speed_knots=((0.0, 0.0), (4.0, 10.0), (10.0, 10.0), (13.5, 0.0), (16.0, 0.0),
                         (20.0, 12.0), (26.0, 12.0), (30.0, 0.0)),
            steer_knots=((0.0, 0.0), (7.0, 0.0), (8.0, 0.15), (9.0, 0.0)),
            roughness=0.003,
            road_seed=101,
            bumps=(RoadBump(position=60.0, height=0.04, length=1.2),),
            description="City traffic: pull away, stop at a light, speed bump",
        ),
        ScenarioProfile(
            name="urban_turns",
            scenario_class=NORMAL,
            duration=30.0,
            speed_knots=((0.0, 6.0),),
            steer_knots=((0.0, 0.0), (5.0, 0.0), (6.0, 1.2), (9.0, 1.2), (10.0, 0.0),
                         (15.0, 0.0), (16.0, -1.2), (19.0, -1.2), (20.0, 0.0)),
            roughness=0.003,
            road_seed=102,
            description="Right-angle junction turns at walking-pace traffic speed",
        ),
        ScenarioProfile(
            name="rural_winding",
            scenario_class=NORMAL,
            duration=30.0,
            speed_knots=((0.0, 16.0),),
            steer_knots=_alternating(start=2.0, period=3.0, amplitude=0.25, count=8, ramp=0.8),
            roughness=0.004,
            road_seed=103,
            description="Country road with linked bends",
        ),
        ScenarioProfile(
            name="rural_rough_road",
            scenario_class=NORMAL,
            duration=25.0,
            speed_knots=((0.0, 12.0),),
            steer_knots=_alternating(start=3.0, period=5.0, amplitude=0.1, count=4, ramp=1.5),
            roughness=0.008,
            road_spacing=0.3,
            road_seed=104,
            description="Broken tarmac at moderate speed",
        ),
        ScenarioProfile(
            name="highway_cruise",
            scenario_class=NORMAL,
            duration=30.0,
            speed_knots=((0.0, 26.0), (15.0, 30.0), (30.0, 28.0)),
            steer_knots=_alternating(start=5.0, period=8.0, amplitude=0.02, count=3, ramp=3.0),
            roughness=0.002,
            road_spacing=1.0,
            road_seed=105,
            description="Motorway cruising with gentle corrections",
        ),
        ScenarioProfile(
            name="highway_lane_change",
            scenario_class=NORMAL,
            duration=20.0,
            speed_knots=((0.0, 27.0),),
            steer_knots=((0.0, 0.0), (6.0, 0.0), (7.0, 0.08), (8.0, -0.08), (9.0, 0.0),
                         (14.0, 0.0), (15.0, -0.08), (16.0, 0.08), (17.0, 0.0)),
            roughness=0.002,
            road_spacing=1.0,
            road_seed=106,
            description="Two planned lane changes",
        ),
        ScenarioProfile(
            name="emergency_braking",
            scenario_class=EMERGENCY,
            duration=15.0,
            speed_knots=((0.0, 25.0), (5.0, 25.0), (8.3, 0.0), (15.0, 0.0)),
            roughness=0.003,
            road_seed=107,
            description="Full stop from highway speed",
        ),
        ScenarioProfile(
            name="obstacle_avoidance",
            scenario_class=EMERGENCY,
            duration=15.0,
            speed_knots=((0.0, 20.0), (8.0, 20.0), (11.0, 12.0), (15.0, 12.0)),
            steer_knots=((0.0, 0.0), (4.0, 0.0), (4.4, 0.6), (5.0, -0.6), (5.6, 0.5), (6.0, 0.0)),
            roughness=0.003,
            road_seed=108,
            description="Double lane change around a stopped vehicle",
        ),
        ScenarioProfile(
            name="distracted_swerve",
            scenario_class=EMERGENCY,
            duration=15.0,
            speed_knots=((0.0, 22.0),),
            steer_knots=((0.0, 0.0), (5.0, 0.0), (5.3, 0.7), (5.8, -0.9), (6.5, 0.3), (7.0, 0.0)),
            roughness=0.003,
            road_seed=109,
            bumps=(RoadBump(position=118.0, height=-0.03, length=0.8, side="left"),),
            description="Driver drifts onto the verge, jerks back and over-corrects",
        ),
        ScenarioProfile(
            name="brake_in_turn",
            scenario_class=EMERGENCY,
            duration=15.0,
            speed_knots=((0.0, 20.0), (4.0, 20.0), (7.0, 6.0), (15.0, 6.0)),
            steer_knots=((0.0, 0.0), (3.0, 0.0), (4.0, 0.4), (10.0, 0.4), (11.0, 0.0)),
            roughness=0.003,
            road_seed=110,
            description="Hard braking while committed to a bend",
        ),
        ScenarioProfile(
            name="figure_eight",
            scenario_class=TRACK,
            duration=40.0,
            speed_knots=((0.0, 0.0), (3.0, 10.0)),
            steer_knots=_alternating(start=3.0, period=9.0, amplitude=0.9, count=4, ramp=1.0),
            roughness=0.001,
            road_seed=111,
            description="Closed-course figure-of-eight",
        ),
        ScenarioProfile(
            name="asymmetric_ellipse",
            scenario_class=TRACK,
            duration=40.0,
            speed_knots=((0.0, 0.0), (3.0, 12.0), (8.0, 14.0), (12.0, 8.0), (18.0, 8.0),
                         (23.0, 14.0), (27.0, 8.0), (33.0, 8.0), (38.0, 12.0)),
            steer_knots=((0.0, 0.0), (8.0, 0.0), (9.0, 0.8), (17.0, 0.8), (18.0, 0.0),
                         (23.0, 0.0), (24.0, 0.6), (32.0, 0.6), (33.0, 0.0)),
            roughness=0.001,
            road_seed=112,
            description="Oval with one tight and one open hairpin",
        ),
    ]


# ========== Library ==========

class ScenarioLibrary:
    """Registry of named scenarios."""

    def __init__(self, scenarios: Optional[Sequence[ScenarioProfile]] = None):
        self._scenarios: Dict[str, ScenarioProfile] = {}
        for scenario in scenarios or []:
            self.register(scenario)

    def register(self, scenario: ScenarioProfile) -> None:
        if scenario.name in self._scenarios:
            raise ConfigError(f"Scenario '{scenario.name}' is already registered")
        self._scenarios[scenario.name] = scenario

    def get(self, name: str) -> ScenarioProfile:
        try:
            return self._scenarios[name]
        except KeyError:
            raise ConfigError(f"Unknown scenario '{name}'. Known: {sorted(self._scenarios)}") from None

    def select(self, names: Sequence[str]) -> List[ScenarioProfile]:
        return [self.get(name) for name in names]

    def names(self, scenario_class: Optional[str] = None) -> List[str]:
        return [
            name for name, s in self._scenarios.items()
            if scenario_class is None or s.scenario_class == scenario_class
        ]


_library: Optional[ScenarioLibrary] = None


def get_scenario_library() -> ScenarioLibrary:
    """Get the shared scenario library (built on first use)."""
    global _library
    if _library is None:
        _library = ScenarioLibrary(_default_scenarios())
    return _library
