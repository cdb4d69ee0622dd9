# -*- coding: utf-8 -*-
"""Report rows, CSV files, ablation summaries and plots."""

import numpy as np
import pandas as pd
import pytest

from dbpnet.estimators import Metrics
from dbpnet.models import ReportRow
from dbpnet.report import (
    CURVE_COLUMNS,
    REPORT_COLUMNS,
    format_ablation_table,
    make_rows,
    plot_predictions,
    plot_training_curve,
    prediction_frame,
    read_report,
    summarize_ablation,
    write_report,
    write_training_log,
)
from dbpnet.validation import BenchIoError


def _metrics(rmse, max_error):
    return Metrics(rmse_per_wheel=np.array(rmse, dtype=float), max_error_per_wheel=np.array(max_error, dtype=float))


def _row(variant, seed, rmse):
    return ReportRow(
        method="dbpnet", variant=variant, scenario_class="All", split="test", seed=seed,
        rmse=rmse, max_error=2.0 * rmse, reference=variant == "Full",
    )


class TestRows:

    def test_one_row_per_class(self):
        metrics = {
            "NormalDriving": _metrics([1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]),
            "All": _metrics([2.0, 2.0, 2.0, 2.0], [4.0, 4.0, 4.0, 4.0]),
        }
        rows = make_rows("dbpnet", "Full", "test", 3, metrics, wall_clock_s=1.5, reference=True)
        assert [r.scenario_class for r in rows] == ["NormalDriving", "All"]
        first = rows[0]
        assert first.rmse == pytest.approx(2.5)
        assert first.max_error == pytest.approx(6.5)
        assert (first.rmse_rr, first.max_error_fl) == (4.0, 5.0)
        assert first.reference and first.seed == 3

    def test_report_keeps_wall_clock_in_the_sidecar(self, tmp_path):
        rows = make_rows("ekf", "EKF", "test", 0, {"All": _metrics([1.0] * 4, [2.0] * 4)}, wall_clock_s=0.25)
        path = write_report(rows, tmp_path / "eval_ekf_test.csv")
        assert list(pd.read_csv(path).columns) == REPORT_COLUMNS
        assert "wall_clock_s" not in REPORT_COLUMNS
        timings = pd.read_csv(tmp_path / "eval_ekf_test_timings.csv")
        assert timings["wall_clock_s"].tolist() == [0.25]

    def test_read_back(self, tmp_path):
        rows = [_row("Full", 0, 10.0), _row("NoDPC", 0, 12.5)]
        restored = read_report(write_report(rows, tmp_path / "ablation.csv"))
        assert [r.model_dump(exclude={"wall_clock_s"}) for r in restored] == [r.model_dump(exclude={"wall_clock_s"}) for r in rows]

    def test_rewriting_gives_identical_bytes(self, tmp_path):
        rows = [_row("Full", s, 10.0 + s) for s in range(3)]
        write_report(rows, tmp_path / "a.csv")
        write_report(rows, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_missing_and_foreign_reports(self, tmp_path):
        with pytest.raises(BenchIoError):
            read_report(tmp_path / "none.csv")
        (tmp_path / "other.csv").write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(BenchIoError):
            read_report(tmp_path / "other.csv")


class TestAblationSummary:

    def test_median_and_iqr_per_variant(self):
        rows = [_row("Full", s, v) for s, v in enumerate([1.0, 2.0, 3.0, 4.0, 5.0])]
        rows += [_row("NoDPC", s, v) for s, v in enumerate([10.0, 20.0, 30.0])]
        summary = summarize_ablation(rows)
        assert summary["variant"].tolist() == ["Full", "NoDPC"]
        full, no_dpc = summary.iloc[0], summary.iloc[1]
        assert (full["rmse_median"], full["rmse_iqr"], full["seeds"]) == (3.0, 2.0, 5)
        assert (no_dpc["rmse_median"], no_dpc["rmse_iqr"]) == (20.0, 10.0)
        assert full["max_error_median"] == 6.0
        assert bool(full["reference"]) and not bool(no_dpc["reference"])

    def test_table_marks_the_reference(self):
        summary = summarize_ablation([_row("Full", 0, 1.0), _row("NoBayesian", 0, 2.0)])
        table = format_ablation_table(summary)
        assert "Full" in table and "(reference)" in table
        assert table.count("(reference)") == 1


class TestFilesAndPlots:

    def test_training_log_columns(self, tmp_path):
        curve = [{"epoch": 1, "data_loss": 1.0, "physics_loss": 0.5, "kl": 3.0, "total": 2.0}]
        path = write_training_log(curve, tmp_path / "training.csv")
        assert list(pd.read_csv(path).columns) == CURVE_COLUMNS

    def test_prediction_frame_lines_up_with_the_split(self, small_dataset):
        test = small_dataset.test
        truth = test.loads().values
        frame = prediction_frame(test, truth + 1.0)
        assert len(frame) == len(test)
        np.testing.assert_allclose(frame["F_fl_pred"] - frame["F_fl_true"], 1.0)
        assert (frame["F_rr_std"] == 0.0).all()
        assert set(frame["scenario"]) == {"test_turn_right"}

    def test_plots_are_svg(self, small_dataset, tmp_path):
        test = small_dataset.test
        truth = test.loads().values
        frame = prediction_frame(test, truth, np.full_like(truth, 5.0))
        path = plot_predictions(frame, "test_turn_right", tmp_path / "plots" / "pred.svg", max_samples=30)
        assert path.read_text(encoding="utf-8").lstrip().startswith("<?xml")
        curve = [{"epoch": e, "data_loss": 1.0 / e, "physics_loss": 0.0, "kl": 1.0, "total": 1.0 / e} for e in (1, 2, 3)]
        assert "<svg" in plot_training_curve(curve, tmp_path / "curve.svg").read_text(encoding="utf-8")
