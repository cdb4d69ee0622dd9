# -*- coding: utf-8 -*-
"""
Bench command orchestration.

Each command resolves its inputs through a BenchContext, runs one stage of the
bench and writes its artifacts under the configured output directory:

1. generate  → simulated dataset (CSV per scenario + manifest.json)
2. train     → checkpoint JSON + per-epoch training log
3. eval      → report rows, per-sample predictions, SVG plots
4. ablate    → variant x seed report + median/IQR summary
5. kincheck  → closure residual / conditioning diagnostics

main() is the argparse front end used by run_bench.py.
"""

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .context import BenchContext, atomic_write_text
from .dataset import DatasetBundle, build_dataset, load_dataset, write_dataset
from .dynamics import KinematicInputs, solve_equilibrium
from .ekf import ekf_estimate_split
from .estimators import (
    Checkpoint,
    evaluate_by_class,
    load_checkpoint,
    predict_split,
    run_ablation,
    save_checkpoint,
    train_dbpnet,
    train_mlp,
    train_pinn,
)
from .kinematics import KinematicSweep, SuspensionGeometry, hard_points, sweep_grid
from .models import ReportRow
from .report import (
    format_ablation_table,
    make_rows,
    plot_predictions,
    plot_training_curve,
    prediction_frame,
    summarize_ablation,
    write_predictions,
    write_report,
    write_summary,
    write_training_log,
)
from .scenarios import get_scenario_library
from .tracing import banner, say, trace
from .validation import (
    AcceptanceFailure,
    BenchError,
    ConfigError,
    DegenerateLink,
    SingularConfiguration,
    exit_code_for,
)


TRAINERS = {"dbpnet": train_dbpnet, "pinn": train_pinn, "mlp": train_mlp}
TRAINABLE_METHODS = tuple(TRAINERS)
EVAL_METHODS = TRAINABLE_METHODS + ("ekf",)
DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "default.json"


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def _load_dataset(ctx: BenchContext) -> DatasetBundle:
    with trace("Load dataset", ctx.verbose):
        return load_dataset(ctx.dataset_dir)


# ========== generate ==========

def cmd_generate(ctx: BenchContext) -> Path:
    """Simulate the selected scenarios and write the dataset directory."""
    config = ctx.config
    banner("STAGE: GENERATE SYNTHETIC DATASET", ctx.verbose)

    profiles = get_scenario_library().select(config.scenarios.names)
    geometry = ctx.load_geometry()
    with trace("Simulate scenarios", ctx.verbose):
        bundle = build_dataset(profiles, config.vehicle, config.noise, config.split, geometry, config.plant)
    with trace("Write dataset", ctx.verbose):
        manifest_path = write_dataset(bundle, ctx.dataset_dir)

    counts = {name: len(bundle.split(name).runs) for name in ("train", "validation", "test")}
    rows = sum(len(r) for r in bundle.runs)
    ctx.log_event("dataset_written", "generate", {
        "dataset_dir": str(ctx.dataset_dir),
        "scenarios": len(bundle.runs),
        "rows": rows,
        "split": counts,
        "noise_seed": config.noise.seed,
    })

    if ctx.verbose:
        print(f"\nDataset written to {ctx.dataset_dir}")
        print(f"  Geometry: {bundle.manifest['geometry']}")
        print(f"  Scenarios: {len(bundle.runs)} ({rows} samples)")
        for record in bundle.manifest["scenarios"]:
            print(f"    {record['name']:<28} {record['class']:<10} {record['split']:<10} {record['rows']:>6} rows")
        print(f"  Split: {counts['train']} train / {counts['validation']} validation / {counts['test']} test")
        print(f"  Collocation rows: {bundle.manifest['collocation']['count']}")
    return manifest_path


# ========== train ==========

def cmd_train(ctx: BenchContext, method: str = "dbpnet") -> Path:
    """Train a DBPnet, PINN or MLP estimator and write its checkpoint and training log."""
    if method not in TRAINABLE_METHODS:
        raise ConfigError(f"Method '{method}' cannot be trained; expected one of {TRAINABLE_METHODS}")
    banner(f"STAGE: TRAIN {method.upper()}", ctx.verbose)

    dataset = _load_dataset(ctx)
    cfg = ctx.config.train
    started = time.perf_counter()
    with trace(f"Train {method}", ctx.verbose):
        checkpoint = TRAINERS[method](dataset, cfg)
    elapsed = time.perf_counter() - started

    checkpoint_path = save_checkpoint(checkpoint, ctx.checkpoint_dir / f"{method}.json")
    log_path = write_training_log(checkpoint.curve, ctx.output_dir / f"training_{method}.csv")
    if ctx.config.report.plots:
        plot_training_curve(checkpoint.curve, ctx.plot_dir / f"training_{method}.svg")

    last = checkpoint.curve[-1]
    ctx.log_event("checkpoint_written", "train", {
        "method": method,
        "variant": checkpoint.variant.name,
        "seed": checkpoint.seed,
        "epochs": len(checkpoint.curve),
        "final_total": last["total"],
        "validation_loss": checkpoint.validation_loss,
        "wall_clock_s": elapsed,
        "checkpoint": str(checkpoint_path),
    })

    if ctx.verbose:
        print(f"\n{method} trained for {len(checkpoint.curve)} epochs in {elapsed:.1f} s")
        print(f"  Final objective: {last['total']:.6g} (data {last['data_loss']:.4g}, physics {last['physics_loss']:.4g}, KL {last['kl']:.4g})")
        if checkpoint.validation_loss is not None:
            print(f"  Validation data loss: {checkpoint.validation_loss:.6g}")
        print(f"  Checkpoint: {checkpoint_path}")
        print(f"  Training log: {log_path}")
    return checkpoint_path


# ========== eval ==========

def _estimate(
    ctx: BenchContext,
    dataset: DatasetBundle,
    method: str,
    split: str,
    checkpoint_path: Optional[Path],
) -> Tuple[np.ndarray, np.ndarray, str, int]:
    """Mean loads, predictive std, variant name and seed for one split."""
    data = dataset.split(split)
    if method == "ekf":
        loads = ekf_estimate_split(data, dataset.vehicle, ctx.config.ekf, dataset.quarter_car, dataset.motion_ratio)
        return loads.values, np.zeros_like(loads.values), "EKF", ctx.config.noise.seed

    path = Path(checkpoint_path) if checkpoint_path else ctx.checkpoint_dir / f"{method}.json"
    checkpoint: Checkpoint = load_checkpoint(path)
    if checkpoint.method != method:
        raise ConfigError(f"Checkpoint {path} holds a '{checkpoint.method}' model, not '{method}'")
    output = predict_split(checkpoint, data)
    return output.mean.values, output.std, checkpoint.variant.name, checkpoint.seed


def write_evaluation(
    ctx: BenchContext,
    dataset: DatasetBundle,
    method: str,
    variant: str,
    split: str,
    seed: int,
    mean: np.ndarray,
    std: np.ndarray,
    wall_clock_s: float = 0.0,
) -> List[ReportRow]:
    """Score predictions against the split's truth and write report, predictions and plots."""
    data = dataset.split(split)
    metrics = evaluate_by_class(mean, data)
    rows = make_rows(method, variant, split, seed, metrics, wall_clock_s, reference=variant == "Full")

    write_report(rows, ctx.output_dir / f"eval_{method}_{split}.csv")
    frame = prediction_frame(data, mean, std)
    write_predictions(frame, ctx.output_dir / f"predictions_{method}_{split}.csv")
    if ctx.config.report.plots:
        for run in data.runs:
            plot_predictions(
                frame,
                run.name,
                ctx.plot_dir / f"{method}_{split}_{run.name}.svg",
                max_samples=ctx.config.report.max_plot_samples,
                title=f"{method} ({variant}) on {run.name}",
            )
    return rows


def cmd_eval(
    ctx: BenchContext,
    method: str = "dbpnet",
    checkpoint_path: Optional[Path] = None,
    split: str = "test",
) -> List[ReportRow]:
    """Evaluate a trained model (or the EKF baseline) on one split."""
    if method not in EVAL_METHODS:
        raise ConfigError(f"Unknown method '{method}', expected one of {EVAL_METHODS}")
    banner(f"STAGE: EVALUATE {method.upper()} ON {split.upper()}", ctx.verbose)

    dataset = _load_dataset(ctx)
    started = time.perf_counter()
    with trace(f"Estimate loads ({method})", ctx.verbose):
        mean, std, variant, seed = _estimate(ctx, dataset, method, split, checkpoint_path)
    elapsed = time.perf_counter() - started
    with trace("Write evaluation", ctx.verbose):
        rows = write_evaluation(ctx, dataset, method, variant, split, seed, mean, std, elapsed)

    per_sample_ms = 1e3 * elapsed / max(len(mean), 1)
    ctx.log_event("evaluation_written", "eval", {
        "method": method,
        "variant": variant,
        "split": split,
        "seed": seed,
        "samples": len(mean),
        "ms_per_sample": per_sample_ms,
        "rmse": {r.scenario_class: r.rmse for r in rows},
    })

    if ctx.verbose:
        print(f"\n{method} ({variant}) on {split}: {len(mean)} samples, {per_sample_ms:.3f} ms/sample")
        for row in rows:
            print(f"  {row.scenario_class:<10} RMSE {row.rmse:9.3f} N   MaxError {row.max_error:9.3f} N")
    return rows


# ========== ablate ==========

def cmd_ablate(ctx: BenchContext) -> Tuple[List[ReportRow], pd.DataFrame]:
    """Train every ablation variant for every seed and summarize test RMSE."""
    banner("STAGE: ABLATION STUDY", ctx.verbose)
    config = ctx.config
    dataset = _load_dataset(ctx)

    with trace(f"Ablation ({len(config.ablation.variants)} variants x {len(config.ablation.seeds)} seeds)", ctx.verbose):
        results = run_ablation(
            dataset,
            config.train,
            variants=config.ablation.variants,
            seeds=config.ablation.seeds,
            workers=config.ablation.workers,
        )

    rows: List[ReportRow] = []
    class_rows: List[ReportRow] = []
    for result in results:
        result_rows = make_rows(
            "dbpnet", result.variant, "test", result.seed, result.metrics,
            result.wall_clock_s, reference=result.variant == "Full",
        )
        rows.extend(r for r in result_rows if r.scenario_class == "All")
        class_rows.extend(r for r in result_rows if r.scenario_class != "All")

    write_report(rows, ctx.output_dir / "ablation.csv")
    write_report(class_rows, ctx.output_dir / "ablation_by_class.csv")
    summary = summarize_ablation(rows)
    write_summary(summary, ctx.output_dir / "ablation_summary.csv")

    ctx.log_event("ablation_written", "ablate", {
        "variants": list(config.ablation.variants),
        "seeds": list(config.ablation.seeds),
        "rows": len(rows),
        "workers": config.ablation.workers,
    })
    say("\n" + format_ablation_table(summary), ctx.verbose)
    return rows, summary


# ========== kincheck ==========

def _condition_numbers(geometry: SuspensionGeometry, sweep: KinematicSweep) -> Tuple[np.ndarray, List[Dict]]:
    """Equilibrium-matrix condition number at every closed grid pose."""
    condition = np.full(sweep.residual.shape, np.nan)
    singular = []
    for i, x_a in enumerate(sweep.xa_grid):
        for j, x_d in enumerate(sweep.xd_grid):
            if not np.isfinite(sweep.residual[i, j]):
                continue
            hp = hard_points(geometry, float(x_a), float(x_d))
            try:
                solution, _ = solve_equilibrium(
                    hp, geometry.body, KinematicInputs(x_a=float(x_a), x_d=float(x_d), F_p=1.0), gravity=np.zeros(3)
                )
            except (SingularConfiguration, DegenerateLink) as exc:
                singular.append({"x_a": float(x_a), "x_d": float(x_d), "reason": str(exc)})
                continue
            condition[i, j] = solution.condition
    return condition, singular


def cmd_kincheck(ctx: BenchContext) -> Dict:
    """
    Sweep the (x_a, x_d) grid of the configured geometry.

    Lockups and singular poses are reported, not fatal. Raises
    AcceptanceFailure when the worst closure residual exceeds the tolerance.
    """
    banner("STAGE: KINEMATIC CHECK", ctx.verbose)
    cfg = ctx.config.kincheck
    geometry = ctx.load_geometry()

    with trace(f"Closure sweep {cfg.n_xa}x{cfg.n_xd}", ctx.verbose):
        sweep = sweep_grid(geometry, cfg.n_xa, cfg.n_xd)
    with trace("Equilibrium conditioning", ctx.verbose):
        condition, singular = _condition_numbers(geometry, sweep)

    finite_condition = condition[np.isfinite(condition)]
    max_residual = sweep.max_residual
    passed = math.isfinite(max_residual) and max_residual <= cfg.tolerance
    report = {
        "geometry": geometry.name,
        "grid": {"n_xa": cfg.n_xa, "n_xd": cfg.n_xd},
        "xa_limits": list(geometry.xa_limits),
        "xd_limits": list(geometry.xd_limits),
        "tolerance": cfg.tolerance,
        "max_residual": _finite_or_none(max_residual),
        "lockups": [{"x_a": a, "x_d": d, "reason": reason} for a, d, reason in sweep.lockups],
        "condition": {
            "max": _finite_or_none(float(finite_condition.max())) if finite_condition.size else None,
            "median": _finite_or_none(float(np.median(finite_condition))) if finite_condition.size else None,
        },
        "singular_poses": singular,
        "passed": passed,
    }
    report_path = ctx.output_dir / "kincheck.json"
    atomic_write_text(report_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    ctx.log_event("kincheck_written", "kincheck", {
        "max_residual": report["max_residual"],
        "lockups": len(sweep.lockups),
        "singular_poses": len(singular),
        "passed": passed,
    })

    if ctx.verbose:
        print(f"\nGeometry {geometry.name}: {cfg.n_xa} x {cfg.n_xd} grid")
        print(f"  Max closure residual: {max_residual:.3e} m (tolerance {cfg.tolerance:.0e})")
        print(f"  Lockups: {len(sweep.lockups)}   Singular poses: {len(singular)}")
        if report["condition"]["max"] is not None:
            print(f"  Equilibrium condition number: max {report['condition']['max']:.3e}, median {report['condition']['median']:.3e}")
        print(f"  Report: {report_path}")

    if not passed:
        raise AcceptanceFailure(
            f"Max closure residual {max_residual:.3e} m exceeds tolerance {cfg.tolerance:.0e} m (see {report_path})"
        )
    return report


# ========== CLI ==========

TROUBLESHOOTING = {
    3: "Check the config JSON and the geometry file it points to.",
    4: "Check that the dataset / checkpoint exists (run `generate` / `train` first) and the output directory is writable.",
    5: "A numerical routine failed; try a smaller dt, a smaller learning rate or a different seed.",
    6: "The kinematic check failed; inspect kincheck.json for the worst grid poses.",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=str(DEFAULT_CONFIG), help="Run config JSON (default: configs/default.json)")
    common.add_argument("--seed", type=int, default=None, help="Override train.seed and noise.seed")
    common.add_argument("--out", default=None, help="Output directory (overrides paths.output_dir)")
    common.add_argument("--quiet", action="store_true", help="Suppress progress output")

    parser = argparse.ArgumentParser(prog="run_bench.py", description="Damper-conditioned wheel-load estimation bench")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("generate", parents=[common], help="Simulate scenarios and write the dataset")

    train = commands.add_parser("train", parents=[common], help="Train an estimator")
    train.add_argument("--method", choices=TRAINABLE_METHODS, default="dbpnet")

    evaluate = commands.add_parser("eval", parents=[common], help="Evaluate an estimator on a split")
    evaluate.add_argument("--method", choices=EVAL_METHODS, default="dbpnet")
    evaluate.add_argument("--checkpoint", default=None, help="Checkpoint JSON (default: <out>/checkpoints/<method>.json)")
    evaluate.add_argument("--split", choices=("train", "validation", "test"), default="test")

    commands.add_parser("ablate", parents=[common], help="Run the ablation study")
    commands.add_parser("kincheck", parents=[common], help="Check linkage closure over the travel grid")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        ctx = BenchContext.from_file(args.config, seed=args.seed, output_dir=args.out, verbose=not args.quiet)
        ctx.log_event("command_started", args.command, {"argv": list(argv) if argv is not None else sys.argv[1:]})
        if args.command == "generate":
            cmd_generate(ctx)
        elif args.command == "train":
            cmd_train(ctx, args.method)
        elif args.command == "eval":
            cmd_eval(ctx, args.method, args.checkpoint, args.split)
        elif args.command == "ablate":
            cmd_ablate(ctx)
        elif args.command == "kincheck":
            cmd_kincheck(ctx)
        ctx.log_event("command_finished", args.command, {"status": "ok"})
    except BenchError as exc:
        code = exit_code_for(exc)
        print(f"\n❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        if code in TROUBLESHOOTING:
            print(f"Troubleshooting: {TROUBLESHOOTING[code]}", file=sys.stderr)
        return code
    return 0
