# -*- coding: utf-8 -*-
"""Scenario library, speed/steering knots and road profiles."""

import numpy as np
import pytest

from dbpnet.scenarios import (
    EMERGENCY,
    NORMAL,
    TRACK,
    RoadBump,
    ScenarioLibrary,
    ScenarioProfile,
    constant_speed,
    get_scenario_library,
)
from dbpnet.validation import ConfigError


def _builtin(library, scenario_class):
    return [name for name in library.names(scenario_class) if not name.startswith("test_")]


class TestLibrary:

    def test_builtin_scenarios_by_class(self):
        library = get_scenario_library()
        assert len(_builtin(library, NORMAL)) == 6
        assert len(_builtin(library, EMERGENCY)) == 4
        assert len(_builtin(library, TRACK)) == 2

    def test_select_keeps_the_requested_order(self):
        selected = get_scenario_library().select(["emergency_braking", "urban_turns"])
        assert [s.name for s in selected] == ["emergency_braking", "urban_turns"]

    def test_unknown_scenario_is_a_config_error(self):
        with pytest.raises(ConfigError, match="Unknown scenario 'nope'"):
            get_scenario_library().get("nope")

    def test_duplicate_registration_is_rejected(self):
        library = ScenarioLibrary([constant_speed("a", 10.0, 1.0)])
        with pytest.raises(ConfigError):
            library.register(constant_speed("a", 12.0, 1.0))


class TestProfiles:

    def test_distance_integrates_piecewise_linear_speed_exactly(self):
        profile = get_scenario_library().get("urban_stop_and_go")
        np.testing.assert_allclose(profile.distance(np.array([0.0, 4.0, 10.0, 13.5])), [0.0, 20.0, 80.0, 97.5])

    def test_distance_holds_the_last_speed(self):
        profile = constant_speed("flat", 10.0, 5.0)
        assert profile.distance(np.array([7.0]))[0] == pytest.approx(70.0)

    def test_speed_and_steering_interpolate(self):
        profile = get_scenario_library().get("brake_in_turn")
        assert profile.speed(5.5) == pytest.approx(13.0)
        assert profile.steering(3.5) == pytest.approx(0.2)
        assert profile.accel_x(np.array([5.5]))[0] == pytest.approx(-14.0 / 3.0)

    def test_road_is_seeded(self):
        profile = get_scenario_library().get("rural_rough_road")
        t = np.linspace(0.0, profile.duration, 50)
        np.testing.assert_array_equal(profile.road_heights(t, 1.55), profile.road_heights(t, 1.55))

    def test_bump_only_hits_its_side(self):
        bump = RoadBump(position=10.0, height=0.05, length=1.0, side="left")
        profile = constant_speed("bump", 10.0, 3.0, roughness=0.0, bumps=(bump,))
        heights = profile.road_heights(np.array([1.05]), 1.55)[0]
        assert heights[0] == pytest.approx(0.05 * 0.5 * (1.0 - np.cos(np.pi)), rel=1e-9)
        assert heights[1] == 0.0

    def test_rear_wheels_trail_by_one_wheelbase(self):
        bump = RoadBump(position=10.0, height=0.05, length=1.0)
        profile = constant_speed("trail", 10.0, 3.0, roughness=0.0, bumps=(bump,))
        front = profile.road_heights(np.array([1.05]), 2.0)[0, 0]
        rear = profile.road_heights(np.array([1.25]), 2.0)[0, 2]
        assert rear == pytest.approx(front)

    def test_invalid_profiles_are_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioProfile(name="x", scenario_class="Offroad", duration=1.0, speed_knots=((0.0, 1.0),))
        with pytest.raises(ConfigError):
            ScenarioProfile(name="x", scenario_class=NORMAL, duration=1.0, speed_knots=((1.0, 1.0), (0.5, 2.0)))
        with pytest.raises(ConfigError):
            ScenarioProfile(name="x", scenario_class=NORMAL, duration=1.0, speed_knots=((0.0, -1.0),))
        with pytest.raises(ConfigError):
            RoadBump(position=1.0, height=0.01, length=1.0, side="middle")
