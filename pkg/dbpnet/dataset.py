# -*- coding: utf-8 -*-
"""
Labeled datasets from the synthetic plant.

Splits are made per scenario, never per row. Each scenario is written as one
CSV (noisy inputs plus noiseless loads) with a clean twin under clean/, and a
manifest.json records the split, seeds, noise and the physics collocation
rows (clean training inputs used for the quarter-car residual).
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from dbpnet.channels import CSV_COLUMNS, INPUT_COLUMNS, SensorSample, WheelLoads, sample_frame
from dbpnet.context import atomic_write_text
from dbpnet.dynamics import QuarterCarParams
from dbpnet.kinematics import SuspensionGeometry
from dbpnet.models import DEFAULT_SCENARIOS, NoiseConfig, PlantConfig, SplitConfig, VehicleParams
from dbpnet.plant import PlantTrajectory, VehiclePlant, add_noise
from dbpnet.scenarios import ScenarioProfile
from dbpnet.validation import BenchIoError, ConfigError, EmptySplit


FORMAT_VERSION = 1
SPLITS = ("train", "validation", "test")

DEFAULT_SPLIT: Dict[str, List[str]] = {
    "train": [
        "urban_stop_and_go",
        "urban_turns",
        "rural_rough_road",
        "highway_cruise",
        "emergency_braking",
        "distracted_swerve",
        "brake_in_turn",
    ],
    "validation": ["highway_lane_change"],
    "test": ["rural_winding", "obstacle_avoidance"],
}


# ========== Split Assignment ==========

def resolve_split(names: Sequence[str], split: SplitConfig) -> Dict[str, List[str]]:
    """
    Assign selected scenarios to train / validation / test.

    Explicit name lists win; otherwise counts take scenarios in selection
    order; with neither, the default ten-scenario selection uses DEFAULT_SPLIT.
    """
    names = list(names)
    if split.train or split.validation or split.test:
        assignment = {"train": list(split.train), "validation": list(split.validation), "test": list(split.test)}
    elif split.counts is not None:
        n_train, n_val, n_test = (split.counts[s] for s in SPLITS)
        if n_train + n_val + n_test > len(names):
            raise ConfigError(f"Split counts need {n_train + n_val + n_test} scenarios, {len(names)} selected")
        assignment = {
            "train": names[:n_train],
            "validation": names[n_train:n_train + n_val],
            "test": names[n_train + n_val:n_train + n_val + n_test],
        }
    elif set(names) == set(DEFAULT_SCENARIOS):
        assignment = {s: list(v) for s, v in DEFAULT_SPLIT.items()}
    else:
        raise ConfigError("A custom scenario selection needs explicit split lists or counts")

    assigned = [n for s in SPLITS for n in assignment[s]]
    if len(set(assigned)) != len(assigned):
        raise ConfigError("A scenario is assigned to more than one split")
    unknown = sorted(set(assigned) - set(names))
    if unknown:
        raise ConfigError(f"Split names scenarios that are not selected: {unknown}")
    empty = [s for s in SPLITS if not assignment[s]]
    if empty:
        raise EmptySplit(f"No scenarios assigned to split(s): {', '.join(empty)}")
    return assignment


# ========== Containers ==========

@dataclass
class ScenarioRun:
    """One scenario's rows: noisy inputs, clean inputs and true loads."""
    name: str
    scenario_class: str
    split: str
    frame: pd.DataFrame
    clean_frame: pd.DataFrame

    def __len__(self) -> int:
        return len(self.frame)

    def inputs(self, clean: bool = False) -> np.ndarray:
        frame = self.clean_frame if clean else self.frame
        return frame[INPUT_COLUMNS].to_numpy()

    def previous_inputs(self, clean: bool = False) -> np.ndarray:
        """x_{t-1} per row; the first row repeats itself so its difference is zero."""
        current = self.inputs(clean)
        return np.vstack([current[:1], current[:-1]])


@dataclass
class DatasetSplit:
    """Concatenated view over the runs of one split."""
    name: str
    runs: List[ScenarioRun]

    def __len__(self) -> int:
        return sum(len(r) for r in self.runs)

    def _stack(self, arrays: List[np.ndarray]) -> np.ndarray:
        if not arrays:
            raise EmptySplit(f"Split '{self.name}' has no scenarios")
        return np.vstack(arrays)

    def inputs(self, clean: bool = False) -> np.ndarray:
        return self._stack([r.inputs(clean) for r in self.runs])

    def previous_inputs(self, clean: bool = False) -> np.ndarray:
        return self._stack([r.previous_inputs(clean) for r in self.runs])

    def loads(self) -> WheelLoads:
        return WheelLoads(self._stack([WheelLoads.from_frame(r.frame).values for r in self.runs]))

    def sample(self, clean: bool = False) -> SensorSample:
        t = np.concatenate([r.frame["t"].to_numpy() for r in self.runs])
        return SensorSample.from_matrix(t, self.inputs(clean))

    def scenario_classes(self) -> np.ndarray:
        return np.concatenate([np.full(len(r), r.scenario_class, dtype=object) for r in self.runs])

    def scenario_names(self) -> np.ndarray:
        return np.concatenate([np.full(len(r), r.name, dtype=object) for r in self.runs])

    def by_class(self, scenario_class: str) -> "DatasetSplit":
        return DatasetSplit(self.name, [r for r in self.runs if r.scenario_class == scenario_class])

    def classes(self) -> List[str]:
        return sorted({r.scenario_class for r in self.runs})


@dataclass
class DatasetBundle:
    """All splits, the collocation rows and the manifest they were written with."""
    runs: List[ScenarioRun]
    collocation: List[Tuple[str, int]]
    manifest: Dict = field(default_factory=dict)

    def split(self, name: str) -> DatasetSplit:
        if name not in SPLITS:
            raise ConfigError(f"Unknown split '{name}', expected one of {SPLITS}")
        return DatasetSplit(name, [r for r in self.runs if r.split == name])

    @property
    def train(self) -> DatasetSplit:
        return self.split("train")

    @property
    def validation(self) -> DatasetSplit:
        return self.split("validation")

    @property
    def test(self) -> DatasetSplit:
        return self.split("test")

    @property
    def quarter_car(self) -> QuarterCarParams:
        return QuarterCarParams(**self.manifest["quarter_car"])

    @property
    def vehicle(self) -> VehicleParams:
        return VehicleParams(**self.manifest["vehicle"])

    @property
    def motion_ratio(self) -> float:
        return float(self.manifest["motion_ratio"])

    def collocation_inputs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Clean (x_t, x_{t-1}) matrices of the collocation rows."""
        by_name = {r.name: r for r in self.runs}
        current, previous = {}, {}
        rows_x, rows_prev = [], []
        for name, row in self.collocation:
            if name not in current:
                current[name] = by_name[name].inputs(clean=True)
                previous[name] = by_name[name].previous_inputs(clean=True)
            rows_x.append(current[name][row])
            rows_prev.append(previous[name][row])
        if not rows_x:
            width = len(INPUT_COLUMNS)
            return np.empty((0, width)), np.empty((0, width))
        return np.array(rows_x), np.array(rows_prev)


# ========== Build ==========

def _simulate_job(job: Tuple[VehicleParams, SuspensionGeometry, PlantConfig, ScenarioProfile]) -> PlantTrajectory:
    vehicle, geometry, config, profile = job
    return VehiclePlant(vehicle, geometry, config).simulate(profile)


def _simulate_all(plant: VehiclePlant, profiles: Sequence[ScenarioProfile]) -> List[PlantTrajectory]:
    if plant.config.workers > 1 and len(profiles) > 1:
        jobs = [(plant.vehicle, plant.geometry, plant.config, p) for p in profiles]
        with ProcessPoolExecutor(max_workers=plant.config.workers) as pool:
            return list(pool.map(_simulate_job, jobs))
    return [plant.simulate(p) for p in profiles]


def build_dataset(
    scenarios: Sequence[ScenarioProfile],
    params: VehicleParams,
    noise: NoiseConfig,
    split: SplitConfig,
    geometry: Optional[SuspensionGeometry] = None,
    plant_config: Optional[PlantConfig] = None,
) -> DatasetBundle:
    """
    Simulate every assigned scenario, add seeded sensor noise and draw the
    collocation rows from the clean training inputs.

    Noise for scenario i (selection order) comes from child i of
    SeedSequence(noise.seed); the last child draws the collocation rows.
    """
    plant_config = plant_config or PlantConfig()
    names = [s.name for s in scenarios]
    assignment = resolve_split(names, split)
    split_of = {n: s for s in SPLITS for n in assignment[s]}

    seeds = np.random.SeedSequence(noise.seed).spawn(len(scenarios) + 1)
    chosen = [(i, s) for i, s in enumerate(scenarios) if s.name in split_of]
    plant = VehiclePlant(params, geometry, plant_config)
    trajectories = _simulate_all(plant, [s for _, s in chosen])

    runs: List[ScenarioRun] = []
    scenario_records = []
    for (index, profile), trajectory in zip(chosen, trajectories):
        noisy = add_noise(trajectory.sample, noise, np.random.default_rng(seeds[index]))
        runs.append(ScenarioRun(
            name=profile.name,
            scenario_class=profile.scenario_class,
            split=split_of[profile.name],
            frame=sample_frame(noisy, trajectory.loads),
            clean_frame=sample_frame(trajectory.sample, trajectory.loads),
        ))
        scenario_records.append({
            "name": profile.name,
            "class": profile.scenario_class,
            "split": split_of[profile.name],
            "file": f"{profile.name}.csv",
            "clean_file": f"clean/{profile.name}.csv",
            "rows": len(trajectory),
            "duration": profile.duration,
            "road_seed": profile.road_seed,
            "noise_stream": index,
        })

    train_rows = [(r.name, i) for r in runs if r.split == "train" for i in range(len(r))]
    count = plant_config.collocation_count
    picker = np.random.default_rng(seeds[-1])
    picks = np.sort(picker.choice(len(train_rows), size=count, replace=count > len(train_rows)))
    collocation = [train_rows[i] for i in picks]

    manifest = {
        "format_version": FORMAT_VERSION,
        "columns": list(CSV_COLUMNS),
        "scenarios": scenario_records,
        "split": assignment,
        "noise": noise.model_dump(),
        "vehicle": params.model_dump(),
        "plant": plant_config.model_dump(exclude={"workers"}),
        "geometry": plant.geometry.name,
        "quarter_car": asdict(plant.quarter_car),
        "motion_ratio": plant.motion_ratio,
        "collocation": {"count": count, "rows": [[n, int(i)] for n, i in collocation]},
    }
    return DatasetBundle(runs=runs, collocation=collocation, manifest=manifest)


# ========== Files ==========

def _csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def write_dataset(bundle: DatasetBundle, out_dir) -> Path:
    """Write every scenario CSV, its clean twin and manifest.json. Returns the manifest path."""
    out_dir = Path(out_dir)
    for run in bundle.runs:
        atomic_write_text(out_dir / f"{run.name}.csv", _csv_text(run.frame))
        atomic_write_text(out_dir / "clean" / f"{run.name}.csv", _csv_text(run.clean_frame))
    manifest_path = out_dir / "manifest.json"
    atomic_write_text(manifest_path, json.dumps(bundle.manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_scenario_csv(path: Path) -> pd.DataFrame:
    """Read one scenario file and check its schema."""
    if not path.exists():
        raise BenchIoError(f"Dataset file missing: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise BenchIoError(f"Cannot parse {path}: {exc}") from exc
    if list(frame.columns) != CSV_COLUMNS:
        raise BenchIoError(f"{path} does not have the expected columns {CSV_COLUMNS}")
    values = frame.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise BenchIoError(f"{path} contains non-finite values")
    return frame.astype(float)


def load_dataset(directory) -> DatasetBundle:
    """Load a dataset written by write_dataset."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise BenchIoError(f"No manifest.json in {directory}; run the generate command first")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BenchIoError(f"Cannot read {manifest_path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise BenchIoError(f"{manifest_path} has unsupported format_version {manifest.get('format_version')}")

    runs = [
        ScenarioRun(
            name=record["name"],
            scenario_class=record["class"],
            split=record["split"],
            frame=read_scenario_csv(directory / record["file"]),
            clean_frame=read_scenario_csv(directory / record["clean_file"]),
        )
        for record in manifest["scenarios"]
    ]
    collocation = [(name, int(row)) for name, row in manifest["collocation"]["rows"]]
    return DatasetBundle(runs=runs, collocation=collocation, manifest=manifest)
