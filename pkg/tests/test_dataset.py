# -*- coding: utf-8 -*-
"""Scenario-level splits, dataset build, and CSV/manifest files."""

import json

import numpy as np
import pandas as pd
import pytest

from dbpnet.channels import CSV_COLUMNS, TRUTH_COLUMNS
from dbpnet.dataset import DEFAULT_SPLIT, SPLITS, load_dataset, resolve_split, write_dataset
from dbpnet.models import DEFAULT_SCENARIOS, SplitConfig
from dbpnet.validation import BenchIoError, ConfigError, EmptySplit


class TestResolveSplit:

    def test_default_selection_uses_the_default_split(self):
        assignment = resolve_split(DEFAULT_SCENARIOS, SplitConfig())
        assert assignment == DEFAULT_SPLIT
        assert [len(assignment[s]) for s in SPLITS] == [7, 1, 2]

    def test_counts_follow_selection_order(self):
        assignment = resolve_split(["a", "b", "c", "d"], SplitConfig(counts={"train": 2, "validation": 1, "test": 1}))
        assert assignment == {"train": ["a", "b"], "validation": ["c"], "test": ["d"]}

    def test_explicit_lists_win_over_counts(self):
        split = SplitConfig(train=["b"], validation=["a"], test=["c"], counts={"train": 1, "validation": 1, "test": 1})
        assert resolve_split(["a", "b", "c"], split)["train"] == ["b"]

    def test_custom_selection_needs_a_split(self):
        with pytest.raises(ConfigError, match="explicit split"):
            resolve_split(["a", "b", "c"], SplitConfig())

    def test_a_scenario_cannot_be_in_two_splits(self):
        with pytest.raises(ConfigError, match="more than one split"):
            resolve_split(["a", "b"], SplitConfig(train=["a"], validation=["a"], test=["b"]))

    def test_empty_split_is_reported(self):
        with pytest.raises(EmptySplit, match="validation"):
            resolve_split(["a", "b"], SplitConfig(train=["a"], test=["b"]))

    def test_too_many_counts(self):
        with pytest.raises(ConfigError):
            resolve_split(["a", "b"], SplitConfig(counts={"train": 2, "validation": 1, "test": 1}))


class TestBuild:

    def test_runs_land_in_their_splits(self, small_dataset):
        assert [r.name for r in small_dataset.train.runs] == ["test_flat", "test_bump"]
        assert [r.name for r in small_dataset.validation.runs] == ["test_turn"]
        assert [r.name for r in small_dataset.test.runs] == ["test_turn_right"]

    def test_row_counts_and_columns(self, small_dataset):
        for run in small_dataset.runs:
            assert len(run) == 61
            assert list(run.frame.columns) == CSV_COLUMNS
        assert len(small_dataset.train) == 122

    def test_noise_only_touches_inputs(self, small_dataset):
        run = small_dataset.train.runs[0]
        np.testing.assert_array_equal(run.frame[TRUTH_COLUMNS].to_numpy(), run.clean_frame[TRUTH_COLUMNS].to_numpy())
        np.testing.assert_array_equal(run.frame["t"].to_numpy(), run.clean_frame["t"].to_numpy())
        assert not np.array_equal(run.inputs(), run.inputs(clean=True))

    def test_previous_inputs_start_with_a_zero_difference(self, small_dataset):
        run = small_dataset.train.runs[0]
        np.testing.assert_array_equal(run.previous_inputs()[0], run.inputs()[0])
        np.testing.assert_array_equal(run.previous_inputs()[1:], run.inputs()[:-1])

    def test_collocation_rows_come_from_training_runs(self, small_dataset, plant_config):
        assert len(small_dataset.collocation) == plant_config.collocation_count
        assert {name for name, _ in small_dataset.collocation} <= {"test_flat", "test_bump"}
        x, x_prev = small_dataset.collocation_inputs()
        assert x.shape == x_prev.shape == (plant_config.collocation_count, 21)

    def test_manifest_records_the_prior(self, small_dataset):
        manifest = small_dataset.manifest
        assert manifest["split"]["test"] == ["test_turn_right"]
        assert small_dataset.motion_ratio > 0
        assert small_dataset.quarter_car.m_unspr == small_dataset.vehicle.unsprung_mass

    def test_by_class_filters_runs(self, small_dataset):
        assert small_dataset.train.classes() == ["EmergencyDriving", "NormalDriving"]
        assert [r.name for r in small_dataset.train.by_class("EmergencyDriving").runs] == ["test_bump"]

    def test_unknown_split_name(self, small_dataset):
        with pytest.raises(ConfigError):
            small_dataset.split("holdout")


class TestFiles:

    def test_write_then_load_preserves_every_value(self, small_dataset, tmp_path):
        manifest_path = write_dataset(small_dataset, tmp_path)
        assert manifest_path == tmp_path / "manifest.json"
        assert (tmp_path / "clean" / "test_flat.csv").exists()
        loaded = load_dataset(tmp_path)
        for original, restored in zip(small_dataset.runs, loaded.runs):
            pd.testing.assert_frame_equal(original.frame, restored.frame)
            pd.testing.assert_frame_equal(original.clean_frame, restored.clean_frame)
        assert loaded.collocation == small_dataset.collocation

    def test_writing_twice_gives_identical_bytes(self, small_dataset, tmp_path):
        write_dataset(small_dataset, tmp_path / "a")
        write_dataset(small_dataset, tmp_path / "b")
        for name in ("manifest.json", "test_bump.csv", "clean/test_turn.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(BenchIoError, match="generate"):
            load_dataset(tmp_path)

    def test_wrong_format_version(self, small_dataset, tmp_path):
        write_dataset(small_dataset, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        manifest["format_version"] = 99
        (tmp_path / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
        with pytest.raises(BenchIoError, match="format_version"):
            load_dataset(tmp_path)

    def test_corrupted_csv(self, small_dataset, tmp_path):
        write_dataset(small_dataset, tmp_path)
        (tmp_path / "test_flat.csv").write_text("t,x\n0,1\n", encoding="utf-8")
        with pytest.raises(BenchIoError, match="expected columns"):
            load_dataset(tmp_path)
