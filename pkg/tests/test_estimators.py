# -*- coding: utf-8 -*-
"""Losses, DBPnet / PINN training, checkpoints, posterior prediction and metrics."""

import json
from dataclasses import replace

import numpy as np
import pytest

from dbpnet.channels import SensorSample, WheelLoads
from dbpnet.dynamics import QuarterCarParams, quarter_car_force
from dbpnet.dataset import build_dataset
from dbpnet.ekf import ekf_estimate_split
from dbpnet.estimators import (
    ABLATION_VARIANTS,
    POINT_RHO,
    Normalization,
    data_loss,
    evaluate,
    evaluate_by_class,
    load_checkpoint,
    physics_loss,
    predict,
    predict_dbpnet,
    predict_split,
    run_ablation,
    save_checkpoint,
    total_objective,
    train_dbpnet,
    train_mlp,
    train_pinn,
)
from dbpnet.kinematics import load_geometry
from dbpnet.models import RunConfig, TrainConfig
from dbpnet.neural import VariationalParams
from dbpnet.plant import DEFAULT_GEOMETRY_PATH
from dbpnet.report import make_rows, summarize_ablation
from dbpnet.scenarios import EMERGENCY, NORMAL, get_scenario_library
from dbpnet.validation import BenchIoError, ConfigError, EmptyBatch, LengthMismatch, ShapeError


Q = QuarterCarParams(m_spr=60.0, m_unspr=9.0, k_f=1e5, k_r=1.2e5, c_f=2000.0, c_r=2200.0, F0_f=700.0, F0_r=800.0)


def _sample(rng, n):
    return SensorSample(
        t=np.arange(n) * 0.05,
        delta=np.zeros(n),
        a_spr=rng.normal(size=(n, 4)),
        a_unspr=rng.normal(size=(n, 4)),
        d_sus=rng.normal(0.0, 0.01, (n, 4)),
        dd_sus=rng.normal(0.0, 0.1, (n, 4)),
        F_p=np.zeros((n, 4)),
    )


@pytest.fixture(scope="module")
def trained(small_dataset):
    cfg = TrainConfig(epochs=3, batch_size=16, mc_samples=2, posterior_samples=4, width=8, n_layers=2, dpc_width=4, dpc_layers=1)
    return train_dbpnet(small_dataset, cfg)


class TestLosses:

    def test_data_loss_sums_wheels_and_averages_rows(self):
        truth = np.zeros((2, 4))
        pred = np.array([[1.0, 1.0, 1.0, 1.0], [2.0, 0.0, 0.0, 0.0]])
        assert data_loss(pred, truth) == pytest.approx(4.0)
        assert data_loss(WheelLoads(pred), WheelLoads(truth)) == pytest.approx(4.0)

    def test_data_loss_rejects_bad_batches(self):
        with pytest.raises(ShapeError):
            data_loss(np.zeros((2, 4)), np.zeros((3, 4)))
        with pytest.raises(EmptyBatch):
            data_loss(np.zeros((0, 4)), np.zeros((0, 4)))

    def test_physics_loss_vanishes_on_the_prior(self, rng):
        sample = _sample(rng, 10)
        model = quarter_car_force(sample.d_sus, sample.dd_sus, sample.a_unspr, Q)
        assert physics_loss(model, sample, Q) == pytest.approx(0.0, abs=1e-12)
        assert physics_loss(model + 2.0, sample, Q) == pytest.approx(16.0)

    def test_physics_loss_rejects_bad_batches(self, rng):
        with pytest.raises(ShapeError):
            physics_loss(np.zeros((3, 4)), _sample(rng, 4), Q)

    def test_total_objective(self):
        cfg = TrainConfig(w_d=200.0, w_p=20.0)
        value = total_objective([2.0, 4.0], [1.0, 1.0], kl=10.0, cfg=cfg, dataset_size=100, batch_size=2)
        assert value == pytest.approx(310.1)

    def test_normalization_round_trip(self, rng):
        norm = Normalization.fit(rng.normal(size=(50, 21)), np.array([700.0, 700.0, 800.0, 800.0]))
        loads = rng.uniform(0.0, 2000.0, (5, 4))
        np.testing.assert_allclose(norm.loads(norm.targets(loads)), loads)


class TestTraining:

    def test_curve_has_one_row_per_epoch(self, trained):
        assert [row["epoch"] for row in trained.curve] == [1, 2, 3]
        cfg = trained.train_config
        for row in trained.curve:
            assert row["total"] == pytest.approx(cfg.w_d * row["data_loss"] + cfg.w_p * row["physics_loss"] + row["kl"] / 122)
            assert row["kl"] > 0
        assert trained.validation_loss is not None and np.isfinite(trained.validation_loss)

    def test_loss_trends_down_over_fifty_epochs(self, small_dataset, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={"epochs": 50, "learning_rate": 1e-2})
        totals = [row["total"] for row in train_dbpnet(small_dataset, cfg).curve]
        assert len(totals) == 50
        assert np.median(totals[-10:]) < np.median(totals[:10])

    def test_prior_only_objective_shrinks_the_kl(self, small_dataset, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={"epochs": 20, "learning_rate": 1e-2, "w_d": 0.0, "w_p": 0.0})
        curve = train_dbpnet(small_dataset, cfg).curve
        kl = [row["kl"] for row in curve]
        assert np.median(kl[-5:]) < np.median(kl[:5])
        assert kl[-1] < kl[0]
        for row in curve:
            assert row["total"] == pytest.approx(row["kl"] / 122)

    def test_training_is_reproducible(self, small_dataset, tiny_train_config, trained):
        again = train_dbpnet(small_dataset, tiny_train_config)
        np.testing.assert_array_equal(again.zeta.mu, trained.zeta.mu)
        np.testing.assert_array_equal(again.dpc, trained.dpc)

    def test_zero_physics_weight_matches_the_no_physics_variant(self, small_dataset, tiny_train_config):
        a = train_dbpnet(small_dataset, tiny_train_config.model_copy(update={"w_p": 0.0}))
        b = train_dbpnet(small_dataset, tiny_train_config, "NoPhysicsLoss")
        np.testing.assert_array_equal(a.zeta.mu, b.zeta.mu)
        assert all(row["physics_loss"] == 0.0 for row in b.curve)

    def test_pinn_is_deterministic_and_learns(self, small_dataset):
        cfg = TrainConfig(epochs=15, batch_size=16, learning_rate=1e-2, width=8, n_layers=2)
        pinn = train_pinn(small_dataset, cfg)
        assert pinn.method == "pinn"
        assert pinn.dpc is None
        np.testing.assert_array_equal(pinn.zeta.rho, POINT_RHO)
        assert all(row["kl"] == 0.0 for row in pinn.curve)
        assert pinn.curve[-1]["data_loss"] < pinn.curve[0]["data_loss"]
        output = predict_split(pinn, small_dataset.test)
        np.testing.assert_array_equal(output.variance, 0.0)

    def test_mlp_uses_the_data_term_only(self, small_dataset, tiny_train_config):
        mlp = train_mlp(small_dataset, tiny_train_config)
        assert (mlp.method, mlp.variant.name) == ("mlp", "MLP")
        assert all(row["physics_loss"] == 0.0 and row["kl"] == 0.0 for row in mlp.curve)
        for row in mlp.curve:
            assert row["total"] == pytest.approx(tiny_train_config.w_d * row["data_loss"])

    def test_unknown_variant(self, small_dataset, tiny_train_config):
        with pytest.raises(ConfigError):
            train_dbpnet(small_dataset, tiny_train_config, "Half")


class TestPrediction:

    def test_posterior_spread_is_reported(self, trained, small_dataset):
        output = predict_split(trained, small_dataset.test)
        assert output.mean.values.shape == (61, 4)
        assert np.all(output.std >= 0.0)
        assert np.any(output.std > 0.0)

    def test_same_seed_same_prediction(self, trained, small_dataset):
        a = predict_split(trained, small_dataset.test)
        b = predict_split(trained, small_dataset.test)
        np.testing.assert_array_equal(a.mean.values, b.mean.values)

    def test_deterministic_prediction_has_no_spread(self, trained, small_dataset):
        test = small_dataset.test
        output = predict(trained, test.inputs(), test.previous_inputs(), deterministic=True)
        np.testing.assert_array_equal(output.variance, 0.0)

    def test_single_posterior_sample_has_no_spread(self, trained, small_dataset):
        test = small_dataset.test
        output = predict_dbpnet(trained, test.inputs(), test.previous_inputs(), S=1)
        np.testing.assert_array_equal(output.variance, 0.0)

    def test_collapsed_posterior_gives_the_mean_network(self, trained, small_dataset):
        test = small_dataset.test
        collapsed = replace(trained, zeta=VariationalParams(trained.zeta.mu, np.full_like(trained.zeta.rho, POINT_RHO)))
        output = predict_dbpnet(collapsed, test.inputs(), test.previous_inputs(), S=5)
        mean_net = predict(trained, test.inputs(), test.previous_inputs(), deterministic=True)
        np.testing.assert_allclose(output.mean.values, mean_net.mean.values, rtol=1e-12)
        np.testing.assert_allclose(output.variance, 0.0, atol=1e-18)

    def test_zero_samples_is_rejected(self, trained, small_dataset):
        test = small_dataset.test
        with pytest.raises(ShapeError):
            predict(trained, test.inputs(), test.previous_inputs(), samples=0)

    def test_checkpoint_round_trip(self, trained, small_dataset, tmp_path):
        path = save_checkpoint(trained, tmp_path / "dbpnet.json")
        restored = load_checkpoint(path)
        assert restored.variant == trained.variant
        assert restored.curve == trained.curve
        a = predict_split(trained, small_dataset.test)
        b = predict_split(restored, small_dataset.test)
        np.testing.assert_allclose(a.mean.values, b.mean.values, rtol=1e-12)

    def test_unreadable_checkpoints(self, trained, tmp_path):
        with pytest.raises(BenchIoError, match="not found"):
            load_checkpoint(tmp_path / "missing.json")
        path = save_checkpoint(trained, tmp_path / "old.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        data["format_version"] = 0
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(BenchIoError, match="format_version"):
            load_checkpoint(path)


class TestMetrics:

    def test_rmse_and_max_error(self):
        truth = np.full((2, 4), 700.0)
        pred = truth + np.array([[1.0, 0.0, 0.0, 0.0], [-3.0, 0.0, 0.0, 0.0]])
        metrics = evaluate(pred, truth)
        np.testing.assert_allclose(metrics.rmse_per_wheel, [np.sqrt(5.0), 0.0, 0.0, 0.0])
        assert metrics.rmse == pytest.approx(np.sqrt(5.0) / 4.0)
        assert metrics.max_error == pytest.approx(0.75)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            evaluate(np.zeros((3, 4)), np.zeros((2, 4)))

    def test_by_class_on_the_truth_is_zero(self, small_dataset):
        train = small_dataset.train
        result = evaluate_by_class(train.loads(), train)
        assert set(result) == {"NormalDriving", "EmergencyDriving", "All"}
        assert all(m.rmse == 0.0 and m.max_error == 0.0 for m in result.values())


@pytest.fixture(scope="module")
def default_benchmark():
    """The ten-scenario benchmark at the default run configuration."""
    config = RunConfig()
    profiles = get_scenario_library().select(config.scenarios.names)
    geometry = load_geometry(DEFAULT_GEOMETRY_PATH)
    return build_dataset(profiles, config.vehicle, config.noise, config.split, geometry, config.plant)


@pytest.mark.slow
def test_ablation_runs_every_pair_in_order(small_dataset, tiny_train_config):
    results = run_ablation(small_dataset, tiny_train_config, variants=("Full", "NoDPC"), seeds=(0, 1))
    assert [(r.variant, r.seed) for r in results] == [("Full", 0), ("Full", 1), ("NoDPC", 0), ("NoDPC", 1)]
    assert all("All" in r.metrics and r.wall_clock_s > 0 for r in results)


def test_ablation_rejects_unknown_variants_up_front(small_dataset, tiny_train_config):
    with pytest.raises(ConfigError):
        run_ablation(small_dataset, tiny_train_config, variants=("Full", "Nope"), seeds=(0,))


@pytest.mark.slow
def test_ablation_covers_the_full_protocol(small_dataset, tiny_train_config):
    results = run_ablation(small_dataset, tiny_train_config)
    assert [(r.variant, r.seed) for r in results] == [(v, s) for v in ABLATION_VARIANTS for s in range(5)]
    for r in results:
        assert {"NormalDriving", "All"} <= set(r.metrics)
        assert np.isfinite(r.metrics["All"].rmse)
    full = {r.metrics["All"].rmse for r in results if r.variant == "Full"}
    assert len(full) > 1

    rows = [
        row
        for r in results
        for row in make_rows("dbpnet", r.variant, "test", r.seed, r.metrics, r.wall_clock_s, reference=r.variant == "Full")
    ]
    summary = summarize_ablation(rows)
    assert list(summary["variant"]) == list(ABLATION_VARIANTS)
    assert (summary["seeds"] == 5).all()
    assert summary.loc[summary["variant"] == "Full", "reference"].item()


@pytest.mark.slow
def test_full_model_leads_the_default_benchmark(default_benchmark):
    config = RunConfig()
    test = default_benchmark.test
    scores = {}
    for r in run_ablation(default_benchmark, config.train, seeds=config.ablation.seeds, workers=4):
        scores.setdefault(r.variant, []).append(r.metrics)
    for seed in config.ablation.seeds:
        pinn = train_pinn(default_benchmark, config.train.model_copy(update={"seed": seed}))
        scores.setdefault("PINN", []).append(evaluate_by_class(predict_split(pinn, test).mean, test))
    ekf = ekf_estimate_split(test, default_benchmark.vehicle, config.ekf, default_benchmark.quarter_car, default_benchmark.motion_ratio)
    scores["EKF"] = [evaluate_by_class(ekf, test)]

    def median_rmse(method, scenario_class):
        return float(np.median([m[scenario_class].rmse for m in scores[method]]))

    for rival in ("NoPhysicsLoss", "NoBayesian", "NoDPC", "PINN"):
        assert median_rmse("Full", "All") <= median_rmse(rival, "All"), rival
    for method in scores:
        assert median_rmse(method, EMERGENCY) > median_rmse(method, NORMAL), method
