# -*- coding: utf-8 -*-
"""Shared fixtures: default geometry, short scenarios, a small dataset and tiny network configs."""

import json
import os
import sys

import numpy as np
import pytest

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

from dbpnet.context import BenchContext, ENV_DATASET_DIR, ENV_GEOMETRY, ENV_OUTPUT_DIR
from dbpnet.dataset import build_dataset
from dbpnet.kinematics import load_geometry
from dbpnet.models import NoiseConfig, PlantConfig, SplitConfig, TrainConfig, VehicleParams
from dbpnet.plant import DEFAULT_GEOMETRY_PATH
from dbpnet.scenarios import EMERGENCY, RoadBump, ScenarioProfile, constant_speed, get_scenario_library, steady_turn


SHORT_SCENARIOS = ("test_flat", "test_turn", "test_bump")


def short_scenarios():
    """Three few-second maneuvers cheap enough to simulate in every test run."""
    return [
        constant_speed("test_flat", 12.0, 3.0, roughness=0.002, road_seed=1),
        steady_turn("test_turn", 12.0, 0.4, 3.0, roughness=0.002, road_seed=2),
        ScenarioProfile(
            name="test_bump",
            scenario_class=EMERGENCY,
            duration=3.0,
            speed_knots=((0.0, 15.0), (1.0, 15.0), (2.5, 5.0)),
            steer_knots=((0.0, 0.0), (1.0, 0.0), (1.5, 0.6), (2.0, -0.6), (2.5, 0.0)),
            roughness=0.002,
            road_seed=3,
            bumps=(RoadBump(position=20.0, height=0.02, length=0.6, side="left"),),
        ),
    ]


@pytest.fixture(autouse=True)
def _no_path_overrides(monkeypatch):
    for name in (ENV_GEOMETRY, ENV_DATASET_DIR, ENV_OUTPUT_DIR):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(scope="session")
def geometry():
    return load_geometry(DEFAULT_GEOMETRY_PATH)


@pytest.fixture(scope="session")
def vehicle():
    return VehicleParams()


@pytest.fixture(scope="session")
def plant_config():
    return PlantConfig(dt=0.005, output_period=0.05, collocation_count=32, grid_points=5)


@pytest.fixture(scope="session")
def registered_scenarios():
    library = get_scenario_library()
    for profile in short_scenarios():
        if profile.name not in library.names():
            library.register(profile)
    return list(SHORT_SCENARIOS)


@pytest.fixture(scope="session")
def small_dataset(geometry, vehicle, plant_config):
    """Two training scenarios, one validation and one test scenario."""
    profiles = short_scenarios() + [steady_turn("test_turn_right", 12.0, -0.4, 3.0, roughness=0.002, road_seed=4)]
    split = SplitConfig(train=["test_flat", "test_bump"], validation=["test_turn"], test=["test_turn_right"])
    return build_dataset(profiles, vehicle, NoiseConfig(seed=7), split, geometry, plant_config)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(
        epochs=3,
        batch_size=16,
        mc_samples=2,
        posterior_samples=4,
        width=8,
        n_layers=2,
        dpc_width=4,
        dpc_layers=1,
        seed=0,
    )


@pytest.fixture
def bench_config(tmp_path, registered_scenarios):
    """Write a run config for the short scenarios and return its path."""
    config = {
        "paths": {
            "geometry": str(DEFAULT_GEOMETRY_PATH),
            "dataset_dir": "dataset",
            "output_dir": "out",
        },
        "scenarios": {"names": list(registered_scenarios)},
        "split": {"train": ["test_flat"], "validation": ["test_bump"], "test": ["test_turn"]},
        "plant": {"dt": 0.005, "output_period": 0.05, "collocation_count": 16, "grid_points": 5},
        "train": {
            "epochs": 2, "batch_size": 16, "mc_samples": 1, "posterior_samples": 3,
            "width": 6, "n_layers": 2, "dpc_width": 4, "dpc_layers": 1,
        },
        "kincheck": {"n_xa": 5, "n_xd": 5},
        "ablation": {"seeds": [0, 1], "variants": ["Full", "NoPhysicsLoss", "NoBayesian", "NoDPC"]},
        "report": {"plots": True, "max_plot_samples": 50},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


@pytest.fixture
def bench_context(bench_config):
    return BenchContext.from_file(bench_config, verbose=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
