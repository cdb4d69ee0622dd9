# -*- coding: utf-8 -*-
"""End-to-end bench commands and CLI exit codes on the short test scenarios."""

import json
import shutil

import numpy as np
import pandas as pd
import pytest

from dbpnet.context import BenchContext
from dbpnet.dataset import load_dataset
from dbpnet.pipeline import (
    build_parser,
    cmd_ablate,
    cmd_eval,
    cmd_generate,
    cmd_kincheck,
    cmd_train,
    main,
    write_evaluation,
)
from dbpnet.validation import BenchIoError, ConfigError


def _rewrite_config(path, **sections):
    config = json.loads(path.read_text(encoding="utf-8"))
    for key, value in sections.items():
        config[key] = {**config.get(key, {}), **value}
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


@pytest.fixture
def generated(bench_context):
    cmd_generate(bench_context)
    return bench_context


class TestGenerate:

    def test_generate_is_byte_for_byte_repeatable(self, bench_context):
        manifest = cmd_generate(bench_context)
        first = {p.relative_to(manifest.parent): p.read_bytes() for p in manifest.parent.rglob("*.csv")}
        first_manifest = manifest.read_bytes()
        cmd_generate(bench_context)
        second = {p.relative_to(manifest.parent): p.read_bytes() for p in manifest.parent.rglob("*.csv")}
        assert first == second
        assert manifest.read_bytes() == first_manifest
        assert len(first) == 6

    def test_dataset_follows_the_configured_split(self, generated):
        dataset = load_dataset(generated.dataset_dir)
        assert dataset.manifest["split"] == {"train": ["test_flat"], "validation": ["test_bump"], "test": ["test_turn"]}
        assert len(dataset.collocation) == 16

    def test_seed_override_changes_the_noise(self, bench_config):
        a = BenchContext.from_file(bench_config, verbose=False)
        b = BenchContext.from_file(bench_config, seed=5, output_dir=str(bench_config.parent / "other"), verbose=False)
        assert b.config.noise.seed == 5 and b.config.train.seed == 5
        assert b.output_dir == (bench_config.parent / "other").resolve()
        assert a.dataset_dir == b.dataset_dir


class TestTrainAndEval:

    def test_train_then_eval(self, generated):
        checkpoint = cmd_train(generated, "dbpnet")
        assert checkpoint == generated.checkpoint_dir / "dbpnet.json"
        log = pd.read_csv(generated.output_dir / "training_dbpnet.csv")
        assert log["epoch"].tolist() == [1, 2]
        assert (generated.plot_dir / "training_dbpnet.svg").exists()

        rows = cmd_eval(generated, "dbpnet")
        assert [r.scenario_class for r in rows] == ["NormalDriving", "All"]
        assert all(r.variant == "Full" and r.reference for r in rows)
        report = pd.read_csv(generated.output_dir / "eval_dbpnet_test.csv")
        assert len(report) == 2
        assert (generated.output_dir / "eval_dbpnet_test_timings.csv").exists()
        predictions = pd.read_csv(generated.output_dir / "predictions_dbpnet_test.csv")
        assert len(predictions) == 61
        assert (generated.plot_dir / "dbpnet_test_test_turn.svg").exists()

        events = [e["event_type"] for e in generated.read_events()]
        assert events == ["dataset_written", "checkpoint_written", "evaluation_written"]

    def test_ekf_needs_no_checkpoint(self, generated):
        rows = cmd_eval(generated, "ekf", split="validation")
        assert rows[-1].variant == "EKF"
        assert rows[-1].method == "ekf"
        assert np.isfinite(rows[-1].rmse)

    def test_eval_without_checkpoint(self, generated):
        with pytest.raises(BenchIoError, match="Checkpoint not found"):
            cmd_eval(generated, "pinn")

    def test_checkpoint_for_another_method_is_rejected(self, generated):
        pinn = cmd_train(generated, "pinn")
        with pytest.raises(ConfigError, match="holds a 'pinn' model"):
            cmd_eval(generated, "dbpnet", checkpoint_path=pinn)

    def test_perfect_predictions_score_zero(self, generated):
        dataset = load_dataset(generated.dataset_dir)
        truth = dataset.test.loads().values
        rows = write_evaluation(generated, dataset, "oracle", "Oracle", "test", 0, truth, np.zeros_like(truth))
        assert all(r.rmse == 0.0 and r.max_error == 0.0 for r in rows)
        assert not any(r.reference for r in rows)

    def test_untrainable_method(self, generated):
        with pytest.raises(ConfigError):
            cmd_train(generated, "ekf")


class TestKincheck:

    def test_default_geometry_passes(self, bench_context):
        report = cmd_kincheck(bench_context)
        assert report["passed"] is True
        assert report["grid"] == {"n_xa": 5, "n_xd": 5}
        assert report["lockups"] == []
        assert report["max_residual"] < 1e-9
        assert report["condition"]["max"] >= report["condition"]["median"] >= 1.0
        on_disk = json.loads((bench_context.output_dir / "kincheck.json").read_text(encoding="utf-8"))
        assert on_disk == report


class TestCli:

    def test_generate_and_kincheck_exit_zero(self, bench_config):
        assert main(["generate", "--config", str(bench_config), "--quiet"]) == 0
        assert main(["kincheck", "--config", str(bench_config), "--quiet"]) == 0
        ctx = BenchContext.from_file(bench_config, verbose=False)
        events = [e["event_type"] for e in ctx.read_events()]
        assert events.count("command_started") == 2
        assert events.count("command_finished") == 2

    def test_missing_geometry_exits_with_config_error(self, bench_config, tmp_path, capsys):
        _rewrite_config(bench_config, paths={"geometry": str(tmp_path / "nowhere.json")})
        assert main(["kincheck", "--config", str(bench_config), "--quiet"]) == 3
        assert "nowhere.json" in capsys.readouterr().err

    def test_corrupted_geometry_exits_with_config_error(self, bench_config, tmp_path):
        broken = tmp_path / "broken.json"
        broken.write_text("{ not json", encoding="utf-8")
        _rewrite_config(bench_config, paths={"geometry": str(broken)})
        assert main(["kincheck", "--config", str(bench_config), "--quiet"]) == 3

    def test_missing_config_file(self, tmp_path):
        assert main(["generate", "--config", str(tmp_path / "absent.json"), "--quiet"]) == 3

    def test_eval_before_generate_exits_with_io_error(self, bench_config, capsys):
        assert main(["eval", "--config", str(bench_config), "--method", "ekf", "--quiet"]) == 4
        assert "Troubleshooting" in capsys.readouterr().err

    def test_tight_tolerance_fails_acceptance(self, bench_config):
        _rewrite_config(bench_config, kincheck={"tolerance": 1e-30})
        assert main(["kincheck", "--config", str(bench_config), "--quiet"]) == 6

    def test_unknown_method_is_a_usage_error(self, bench_config):
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["train", "--config", str(bench_config), "--method", "ekf"])
        assert excinfo.value.code == 2

    def test_out_flag_redirects_artifacts(self, bench_config, tmp_path):
        out = tmp_path / "elsewhere"
        assert main(["kincheck", "--config", str(bench_config), "--out", str(out), "--quiet"]) == 0
        assert (out / "kincheck.json").exists()


@pytest.mark.slow
def test_ablation_writes_one_row_per_variant_and_seed(generated):
    rows, summary = cmd_ablate(generated)
    assert len(rows) == 8
    assert [(r.variant, r.seed) for r in rows][:2] == [("Full", 0), ("Full", 1)]
    assert summary["variant"].tolist() == ["Full", "NoPhysicsLoss", "NoBayesian", "NoDPC"]
    assert len(pd.read_csv(generated.output_dir / "ablation.csv")) == 8
    assert (generated.output_dir / "ablation_summary.csv").exists()
    assert (generated.output_dir / "ablation_by_class.csv").exists()
