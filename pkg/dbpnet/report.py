# -*- coding: utf-8 -*-
"""
Report rows, CSV writers and SVG plots for the bench commands.

Metric CSVs hold only deterministic columns; wall-clock seconds go to a
<report stem>_timings.csv sidecar next to them.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from dbpnet.channels import TRUTH_COLUMNS  # noqa: E402
from dbpnet.context import atomic_write_text  # noqa: E402
from dbpnet.dataset import DatasetSplit  # noqa: E402
from dbpnet.estimators import Metrics  # noqa: E402
from dbpnet.models import CORNERS, ReportRow  # noqa: E402
from dbpnet.validation import BenchIoError  # noqa: E402


REPORT_COLUMNS: List[str] = [name for name in ReportRow.model_fields if name != "wall_clock_s"]
TIMING_COLUMNS = ["method", "variant", "scenario_class", "split", "seed", "wall_clock_s"]
CURVE_COLUMNS = ["epoch", "data_loss", "physics_loss", "kl", "total"]

plt.rcParams["svg.hashsalt"] = "dbpnet"


def _csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


# ========== Report Rows ==========

def make_rows(
    method: str,
    variant: str,
    split: str,
    seed: int,
    metrics: Dict[str, Metrics],
    wall_clock_s: float = 0.0,
    reference: bool = False,
) -> List[ReportRow]:
    """One row per scenario class in metrics (including 'All')."""
    rows = []
    for scenario_class, m in metrics.items():
        fields = {f"rmse_{c}": float(v) for c, v in zip(CORNERS, m.rmse_per_wheel)}
        fields.update({f"max_error_{c}": float(v) for c, v in zip(CORNERS, m.max_error_per_wheel)})
        rows.append(ReportRow(
            method=method,
            variant=variant,
            scenario_class=scenario_class,
            split=split,
            seed=seed,
            rmse=m.rmse,
            max_error=m.max_error,
            reference=reference,
            wall_clock_s=wall_clock_s,
            **fields,
        ))
    return rows


def write_report(rows: Sequence[ReportRow], path) -> Path:
    """Metrics CSV at path plus <stem>_timings.csv beside it."""
    path = Path(path)
    records = [row.model_dump() for row in rows]
    atomic_write_text(path, _csv_text(pd.DataFrame(records, columns=REPORT_COLUMNS)))
    atomic_write_text(path.with_name(f"{path.stem}_timings.csv"), _csv_text(pd.DataFrame(records, columns=TIMING_COLUMNS)))
    return path


def read_report(path) -> List[ReportRow]:
    path = Path(path)
    if not path.exists():
        raise BenchIoError(f"Report not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != REPORT_COLUMNS:
        raise BenchIoError(f"{path} does not have the report columns")
    return [ReportRow(**record) for record in frame.to_dict(orient="records")]


# ========== Ablation Summary ==========

def summarize_ablation(rows: Sequence[ReportRow], scenario_class: str = "All") -> pd.DataFrame:
    """Median and interquartile range over seeds, one line per variant."""
    frame = pd.DataFrame([r.model_dump() for r in rows if r.scenario_class == scenario_class])
    lines = []
    for variant, group in frame.groupby("variant", sort=False):
        rmse = group["rmse"].to_numpy()
        max_error = group["max_error"].to_numpy()
        q_rmse = np.percentile(rmse, [25, 50, 75])
        q_max = np.percentile(max_error, [25, 50, 75])
        lines.append({
            "variant": variant,
            "scenario_class": scenario_class,
            "seeds": len(group),
            "rmse_median": q_rmse[1],
            "rmse_iqr": q_rmse[2] - q_rmse[0],
            "max_error_median": q_max[1],
            "max_error_iqr": q_max[2] - q_max[0],
            "reference": bool(group["reference"].any()),
        })
    return pd.DataFrame(lines)


def format_ablation_table(summary: pd.DataFrame) -> str:
    text = "Ablation (median ± IQR over seeds, N)\n" + "=" * 60 + "\n"
    for _, line in summary.iterrows():
        marker = "  (reference)" if line["reference"] else ""
        text += (
            f"{line['variant']:<15} RMSE {line['rmse_median']:8.2f} ± {line['rmse_iqr']:6.2f}   "
            f"MaxError {line['max_error_median']:8.2f} ± {line['max_error_iqr']:6.2f}{marker}\n"
        )
    return text


def write_summary(summary: pd.DataFrame, path) -> Path:
    path = Path(path)
    atomic_write_text(path, _csv_text(summary))
    return path


# ========== Training Log / Predictions ==========

def write_training_log(curve: Sequence[Dict[str, float]], path) -> Path:
    path = Path(path)
    atomic_write_text(path, _csv_text(pd.DataFrame(list(curve), columns=CURVE_COLUMNS)))
    return path


def prediction_frame(split: DatasetSplit, mean: np.ndarray, std: Optional[np.ndarray] = None) -> pd.DataFrame:
    """Per-sample truth, mean prediction and predictive std."""
    t = np.concatenate([r.frame["t"].to_numpy() for r in split.runs])
    frame = pd.DataFrame({"scenario": split.scenario_names(), "scenario_class": split.scenario_classes(), "t": t})
    truth = split.loads().values
    std = np.zeros_like(mean) if std is None else std
    for j, column in enumerate(TRUTH_COLUMNS):
        frame[f"{column}_true"] = truth[:, j]
        frame[f"{column}_pred"] = mean[:, j]
        frame[f"{column}_std"] = std[:, j]
    return frame


def write_predictions(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    atomic_write_text(path, _csv_text(frame))
    return path


# ========== Plots ==========

def _save_svg(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise BenchIoError(f"Cannot write plot {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_predictions(frame: pd.DataFrame, scenario: str, path, max_samples: int = 400, title: str = "") -> Path:
    """Predicted vs true loads for one scenario with a ±2σ band."""
    rows = frame[frame["scenario"] == scenario].head(max_samples)
    fig, axes = plt.subplots(4, 1, figsize=(9, 9), sharex=True)
    for ax, column in zip(axes, TRUTH_COLUMNS):
        t = rows["t"].to_numpy()
        pred = rows[f"{column}_pred"].to_numpy()
        band = 2.0 * rows[f"{column}_std"].to_numpy()
        ax.plot(t, rows[f"{column}_true"].to_numpy(), color="black", lw=1.0, label="true")
        ax.plot(t, pred, color="tab:blue", lw=1.0, label="predicted")
        ax.fill_between(t, pred - band, pred + band, color="tab:blue", alpha=0.25, lw=0, label="±2σ")
        ax.set_ylabel(f"{column} [N]")
    axes[0].legend(loc="upper right", fontsize=8)
    axes[0].set_title(title or scenario)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    return _save_svg(fig, Path(path))


def plot_training_curve(curve: Sequence[Dict[str, float]], path) -> Path:
    frame = pd.DataFrame(list(curve), columns=CURVE_COLUMNS)
    fig, ax = plt.subplots(figsize=(7, 4))
    for column in ("data_loss", "physics_loss", "total"):
        ax.semilogy(frame["epoch"], np.maximum(frame[column], 1e-12), label=column)
    ax.set_xlabel("epoch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save_svg(fig, Path(path))
