# -*- coding: utf-8 -*-
"""
Synthetic 7-DOF full-vehicle plant.

States (deviation from static ride height, z up):
    [z_s, phi, theta, z_u_fl, z_u_fr, z_u_rl, z_u_rr] and their rates.
phi is roll (left side up positive) and theta pitch (nose down positive).
Lateral and longitudinal load transfer enter as quasi-static inertial
moments m_s * a * h_s on the sprung body, with h_s the sprung CG height
left once the unsprung masses are taken out of the vehicle CG. The
unsprung share m_u * a * h_u goes straight to the contact patches. An
anti-roll coupling on one axle makes the steady roll-moment split follow
the static axle loads. The linkage (front geometry, rear with the rack
frozen) provides the damper motion ratio and the pushrod-to-tire load gain
used to synthesize the d_sus and F_p channels.
"""

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from dbpnet.channels import SensorSample, WheelLoads
from dbpnet.dynamics import QuarterCarParams, load_gain
from dbpnet.kinematics import SuspensionGeometry, hard_points, load_geometry, wheel_travel_table
from dbpnet.models import NoiseConfig, PlantConfig, VehicleParams
from dbpnet.scenarios import ScenarioProfile
from dbpnet.validation import ConfigError, IntegrationDiverged


DEFAULT_GEOMETRY_PATH = Path(__file__).resolve().parent.parent / "data" / "geometry" / "fsae_front_v1.json"

N_STATES = 14


def damper_force(velocity: np.ndarray, vehicle: VehicleParams) -> np.ndarray:
    """Digressive damper map at the damper: slope damper_high near zero, damper_low beyond the knee."""
    v_k = vehicle.damper_knee
    return vehicle.damper_low * velocity + (vehicle.damper_high - vehicle.damper_low) * v_k * np.tanh(velocity / v_k)


def lateral_acceleration(speed: np.ndarray, steer: np.ndarray, vehicle: VehicleParams) -> np.ndarray:
    """Kinematic bicycle a_y = v^2 tan(delta_road) / L, saturated at the tire limit."""
    a_y = speed ** 2 * np.tan(steer / vehicle.steering_ratio) / vehicle.wheelbase
    return np.clip(a_y, -vehicle.max_lateral_accel, vehicle.max_lateral_accel)


@dataclass
class PlantTrajectory:
    """One simulated run at the output rate."""
    name: str
    scenario_class: str
    t: np.ndarray
    states: np.ndarray
    sample: SensorSample
    loads: WheelLoads
    a_x: np.ndarray
    a_y: np.ndarray
    road: np.ndarray

    def __len__(self) -> int:
        return self.t.shape[0]


class VehiclePlant:
    """
    Full-vehicle plant bound to one vehicle, one corner geometry and one
    integrator configuration. Linkage lookup tables are built once.
    """

    def __init__(
        self,
        vehicle: VehicleParams,
        geometry: Optional[SuspensionGeometry] = None,
        config: Optional[PlantConfig] = None,
    ):
        self.vehicle = vehicle
        self.geometry = geometry or load_geometry(DEFAULT_GEOMETRY_PATH)
        self.config = config or PlantConfig()

        half_f = vehicle.track_front / 2.0
        half_r = vehicle.track_rear / 2.0
        # Corner positions relative to the CG, fl / fr / rl / rr
        self.x = np.array([vehicle.cg_to_front, vehicle.cg_to_front, -vehicle.cg_to_rear, -vehicle.cg_to_rear])
        self.y = np.array([half_f, -half_f, half_r, -half_r])
        self.k_wheel = np.array([vehicle.stiffness_front] * 2 + [vehicle.stiffness_rear] * 2)

        self.xd_table, self.w_table, self.mr_table = wheel_travel_table(self.geometry)
        self.motion_ratio = float(np.interp(0.0, self.w_table, self.mr_table))
        self.quarter_car = QuarterCarParams.from_vehicle(vehicle, self.motion_ratio, self.motion_ratio)
        self.static_loads = self.quarter_car.corner_arrays()[0]
        self.anti_roll = self._anti_roll_rates()

    def _anti_roll_rates(self) -> np.ndarray:
        """
        Per-corner anti-roll coupling (N/m) that splits the steady sprung roll
        moment so each axle's total transfer matches its static load share.

        An axle's roll stiffness is its wheel rate plus twice the coupling, in
        series with the tire. The axle already stiff enough keeps its springs;
        the other one gets a bar.
        """
        v = self.vehicle
        front_share = v.cg_to_rear / v.wheelbase
        unsprung_moment = 2.0 * v.unsprung_mass * v.unsprung_cg_height
        target = (front_share * v.total_mass * v.cg_height - unsprung_moment) / (v.sprung_mass * v.sprung_cg_height)
        if not 0.0 < target < 1.0:
            raise ConfigError(f"Sprung roll moment cannot be split to a front share of {target:.3f}")

        shares = np.array([target, 1.0 - target])
        tracks = np.array([v.track_front, v.track_rear])
        rates = np.array([v.stiffness_front, v.stiffness_rear])
        roll = 0.5 * tracks ** 2 / (1.0 / rates + 1.0 / v.tire_stiffness)
        ratio = roll / shares
        stiff = int(np.argmax(ratio))
        k_series = 2.0 * shares * ratio[stiff] / tracks ** 2
        if np.any(k_series >= v.tire_stiffness):
            raise ConfigError("Tire stiffness is too low to carry the static roll-moment split")
        k_roll = 1.0 / (1.0 / k_series - 1.0 / v.tire_stiffness)
        bar = 0.5 * (k_roll - rates)
        bar[stiff] = 0.0
        return np.repeat(bar, 2)

    def unsprung_transfer(self, a_x: np.ndarray, a_y: np.ndarray) -> np.ndarray:
        """Quasi-static tire-load shift (N) from the unsprung masses' inertia."""
        v = self.vehicle
        moment = v.unsprung_mass * v.unsprung_cg_height
        return -moment * a_y / self.y - 2.0 * moment * a_x * np.sign(self.x) / v.wheelbase

    # ----- linkage lookups -----

    @cached_property
    def _gain_table(self) -> RegularGridInterpolator:
        n = self.config.grid_points
        xa_grid = np.linspace(*self.geometry.xa_limits, n)
        xd_grid = np.linspace(*self.geometry.xd_limits, n)
        gains = np.empty((n, n))
        for i, x_a in enumerate(xa_grid):
            for j, x_d in enumerate(xd_grid):
                gains[i, j] = load_gain(hard_points(self.geometry, float(x_a), float(x_d)), self.geometry.body)
        return RegularGridInterpolator((xa_grid, xd_grid), gains)

    def pushrod_gain(self, x_a: np.ndarray, x_d: np.ndarray) -> np.ndarray:
        """dF_z/dF_p at the given rack and damper travels (clipped to the linkage window)."""
        x_a = np.clip(x_a, *self.geometry.xa_limits)
        x_d = np.clip(x_d, *self.geometry.xd_limits)
        return self._gain_table(np.stack([np.ravel(x_a), np.ravel(x_d)], axis=-1)).reshape(np.shape(x_a))

    def damper_travel(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(x_d, dx_d/dw) for wheel travel w."""
        return np.interp(w, self.w_table, self.xd_table), np.interp(w, self.w_table, self.mr_table)

    def rack_travel(self, steer: np.ndarray) -> np.ndarray:
        """(n, 4) rack input per corner; the right corner sees the mirror image, rears are unsteered."""
        x_a = self.vehicle.rack_per_rad * np.asarray(steer, dtype=float)
        zero = np.zeros_like(x_a)
        return np.stack([x_a, -x_a, zero, zero], axis=-1)

    # ----- equations of motion -----

    def corner_forces(self, y: np.ndarray, z_r: np.ndarray) -> Dict[str, np.ndarray]:
        v = self.vehicle
        z_s, phi, theta = y[0:3]
        vz_s, vphi, vtheta = y[7:10]
        z_u, vz_u = y[3:7], y[10:14]

        z_corner = z_s + self.y * phi - self.x * theta
        v_corner = vz_s + self.y * vphi - self.x * vtheta
        w = z_u - z_corner
        w_dot = vz_u - v_corner
        x_d, mr = self.damper_travel(w)
        xd_dot = mr * w_dot
        twist = w - w[[1, 0, 3, 2]]
        suspension = self.k_wheel * w + self.anti_roll * twist + mr * damper_force(xd_dot, v)
        # Tire leaves the road once its deflection unloads the static share
        tire = np.maximum(v.tire_stiffness * (z_r - z_u), -self.static_loads)
        return {"w": w, "x_d": x_d, "xd_dot": xd_dot, "mr": mr, "suspension": suspension, "tire": tire}

    def derivative(self, y: np.ndarray, a_x: float, a_y: float, z_r: np.ndarray) -> np.ndarray:
        v = self.vehicle
        f = self.corner_forces(y, z_r)
        F_s = f["suspension"]
        acc = np.empty(7)
        acc[0] = F_s.sum() / v.sprung_mass
        acc[1] = (np.dot(self.y, F_s) + v.sprung_mass * a_y * v.sprung_cg_height) / v.roll_inertia
        acc[2] = (-np.dot(self.x, F_s) - v.sprung_mass * a_x * v.sprung_cg_height) / v.pitch_inertia
        acc[3:7] = (f["tire"] - F_s) / v.unsprung_mass
        return np.concatenate([y[7:14], acc])

    # ----- integration -----

    def _inputs(self, profile: ScenarioProfile, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        speed = profile.speed(times)
        steer = profile.steering(times)
        a_x = profile.accel_x(times)
        a_y = lateral_acceleration(speed, steer, self.vehicle)
        z_r = profile.road_heights(times, self.vehicle.wheelbase, profile.road(self.vehicle.wheelbase))
        return a_x, a_y, z_r

    def _check_profile(self, profile: ScenarioProfile) -> None:
        steer = np.array([k[1] for k in profile.steer_knots])
        peak_rack = self.vehicle.rack_per_rad * float(np.max(np.abs(steer)))
        limit = min(abs(self.geometry.xa_limits[0]), abs(self.geometry.xa_limits[1]))
        if peak_rack > limit:
            raise ConfigError(
                f"Scenario '{profile.name}' needs {peak_rack * 1e3:.1f} mm of rack travel, "
                f"linkage allows {limit * 1e3:.1f} mm"
            )

    def simulate(self, profile: ScenarioProfile, dt: Optional[float] = None) -> PlantTrajectory:
        """Integrate one scenario with fixed-step RK4 and emit samples at the output period."""
        dt = self.config.dt if dt is None else dt
        if not 0.0 < dt <= 0.05:
            raise ConfigError(f"Integrator step must lie in (0, 0.05] s, got {dt}")
        decimation = int(round(self.config.output_period / dt))
        if decimation < 1 or abs(decimation * dt - self.config.output_period) > 1e-9:
            raise ConfigError(f"Output period {self.config.output_period} s is not a multiple of dt = {dt} s")
        self._check_profile(profile)

        n_steps = int(round(profile.duration / dt))
        half_times = np.arange(2 * n_steps + 1) * (dt / 2.0)
        a_x, a_y, z_r = self._inputs(profile, half_times)

        y = np.zeros(N_STATES)
        out_index = [0]
        out_states = [y.copy()]
        for k in range(n_steps):
            i = 2 * k
            k1 = self.derivative(y, a_x[i], a_y[i], z_r[i])
            k2 = self.derivative(y + 0.5 * dt * k1, a_x[i + 1], a_y[i + 1], z_r[i + 1])
            k3 = self.derivative(y + 0.5 * dt * k2, a_x[i + 1], a_y[i + 1], z_r[i + 1])
            k4 = self.derivative(y + dt * k3, a_x[i + 2], a_y[i + 2], z_r[i + 2])
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if (k + 1) % decimation == 0:
                if not np.all(np.isfinite(y)) or np.linalg.norm(y) > self.config.state_bound:
                    raise IntegrationDiverged(
                        f"Scenario '{profile.name}' diverged at t = {(k + 1) * dt:.3f} s "
                        f"(|state| = {np.linalg.norm(y):.3g})"
                    )
                out_index.append(i + 2)
                out_states.append(y.copy())

        index = np.array(out_index)
        states = np.array(out_states)
        return self._observe(profile, half_times[index], states, a_x[index], a_y[index], z_r[index])

    def _observe(self, profile, t, states, a_x, a_y, z_r) -> PlantTrajectory:
        n = t.shape[0]
        v = self.vehicle
        a_spr = np.empty((n, 4))
        a_unspr = np.empty((n, 4))
        d_sus = np.empty((n, 4))
        dd_sus = np.empty((n, 4))
        spring_total = np.empty((n, 4))
        tire = np.empty((n, 4))
        for row in range(n):
            y = states[row]
            f = self.corner_forces(y, z_r[row])
            rates = self.derivative(y, a_x[row], a_y[row], z_r[row])
            acc_s, acc_phi, acc_theta = rates[7:10]
            a_spr[row] = acc_s + self.y * acc_phi - self.x * acc_theta
            a_unspr[row] = rates[10:14]
            d_sus[row] = f["x_d"]
            dd_sus[row] = f["xd_dot"]
            spring_total[row] = (self.static_loads - v.unsprung_mass * v.gravity) + f["suspension"]
            tire[row] = f["tire"]

        steer = profile.steering(t)
        x_a = self.rack_travel(steer)
        F_p = spring_total / self.pushrod_gain(x_a, d_sus)
        sample = SensorSample(t=t, delta=steer, a_spr=a_spr, a_unspr=a_unspr, d_sus=d_sus, dd_sus=dd_sus, F_p=F_p)
        transfer = self.unsprung_transfer(a_x[:, None], a_y[:, None])
        loads = WheelLoads(np.maximum(self.static_loads + tire + transfer, 0.0))
        return PlantTrajectory(
            name=profile.name,
            scenario_class=profile.scenario_class,
            t=t,
            states=states,
            sample=sample,
            loads=loads,
            a_x=a_x,
            a_y=a_y,
            road=z_r,
        )


def simulate(
    params: VehicleParams,
    profile: ScenarioProfile,
    dt: float,
    geometry: Optional[SuspensionGeometry] = None,
    config: Optional[PlantConfig] = None,
) -> PlantTrajectory:
    """Run one scenario through a freshly built plant."""
    return VehiclePlant(params, geometry, config).simulate(profile, dt)


NOISE_CHANNELS = ("delta", "a_spr", "a_unspr", "d_sus", "dd_sus", "F_p")


def add_noise(sample: SensorSample, cfg: NoiseConfig, rng: np.random.Generator) -> SensorSample:
    """Independent zero-mean Gaussian noise on every input channel; time stamps untouched."""
    noisy = sample.copy()
    for name in NOISE_CHANNELS:
        sigma = getattr(cfg, name)
        if sigma == 0.0:
            continue
        values = getattr(noisy, name)
        setattr(noisy, name, values + rng.normal(0.0, sigma, values.shape))
    return noisy
