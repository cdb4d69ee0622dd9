# -*- coding: utf-8 -*-
"""
Wheel-load estimators: losses, DBPnet / PINN training, posterior
prediction, metrics, ablations and checkpoints.

The network works in normalized units: inputs are z-scored with training
statistics, outputs are (F - F0) / F0 per corner. Losses reported by
data_loss / physics_loss are in newtons squared; training uses the same
formulas on normalized values.
"""

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from dbpnet.channels import N_INPUTS, SensorSample, WheelLoads
from dbpnet.context import atomic_write_text
from dbpnet.dataset import DatasetBundle, DatasetSplit
from dbpnet.dynamics import QuarterCarParams, quarter_car_force
from dbpnet.models import TrainConfig
from dbpnet.neural import (
    VARIANTS,
    Adam,
    DpcShape,
    Mode,
    ModelVariant,
    NetworkShape,
    PriorSpec,
    VariationalParams,
    conditioned_backward,
    conditioned_forward,
    get_variant,
    init_layers,
    kl_gradients,
    kl_mean_field,
    pack_layers,
)
from dbpnet.validation import BenchIoError, EmptyBatch, LengthMismatch, NonFiniteLoss, ShapeError


CHECKPOINT_VERSION = 1

# softplus of this is exactly 0.0: point weights
POINT_RHO = -1000.0

LossInput = Union[WheelLoads, np.ndarray]


def _loads_array(values: LossInput) -> np.ndarray:
    return values.values if isinstance(values, WheelLoads) else np.atleast_2d(np.asarray(values, dtype=float))


# ========== Losses ==========

def data_loss(pred: LossInput, truth: LossInput) -> float:
    """Mean over the batch of the squared error summed over the four wheels."""
    pred, truth = _loads_array(pred), _loads_array(truth)
    if pred.shape != truth.shape:
        raise ShapeError(f"Prediction {pred.shape} and truth {truth.shape} differ in shape")
    if pred.shape[0] == 0:
        raise EmptyBatch("data_loss needs at least one sample")
    return float(np.mean(np.sum((pred - truth) ** 2, axis=1)))


def physics_loss(pred: LossInput, inputs: SensorSample, q: QuarterCarParams) -> float:
    """Mean over the batch of the squared quarter-car residual summed over corners."""
    pred = _loads_array(pred)
    if pred.shape[0] == 0 or len(inputs) == 0:
        raise EmptyBatch("physics_loss needs at least one collocation sample")
    if pred.shape[0] != len(inputs):
        raise ShapeError(f"{pred.shape[0]} predictions for {len(inputs)} input rows")
    residual = pred - quarter_car_force(inputs.d_sus, inputs.dd_sus, inputs.a_unspr, q)
    return float(np.mean(np.sum(residual ** 2, axis=1)))


def total_objective(
    data_terms,
    physics_terms,
    kl: float,
    cfg: TrainConfig,
    dataset_size: int,
    batch_size: int = 1,
) -> float:
    """
    mean_k(w_d * L_d,k / |B| + w_p * L_p,k / |B|) + KL / |D|

    data_terms and physics_terms hold one batch-summed loss per weight sample k.
    """
    data_terms = np.atleast_1d(np.asarray(data_terms, dtype=float))
    physics_terms = np.atleast_1d(np.asarray(physics_terms, dtype=float))
    if data_terms.shape != physics_terms.shape:
        raise ShapeError("Need one physics term per data term")
    per_sample = cfg.w_d * data_terms / batch_size + cfg.w_p * physics_terms / batch_size
    return float(np.mean(per_sample) + kl / dataset_size)


# ========== Normalization ==========

@dataclass
class Normalization:
    """Input z-scores from the training split; outputs relative to the static corner loads."""
    mean: np.ndarray
    std: np.ndarray
    static_load: np.ndarray

    @classmethod
    def fit(cls, inputs: np.ndarray, static_load: np.ndarray) -> "Normalization":
        std = inputs.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        return cls(mean=inputs.mean(axis=0), std=std, static_load=np.asarray(static_load, dtype=float))

    def inputs(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def targets(self, loads: np.ndarray) -> np.ndarray:
        return loads / self.static_load - 1.0

    def loads(self, y: np.ndarray) -> np.ndarray:
        return self.static_load * (1.0 + y)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "static_load": self.static_load.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Normalization":
        return cls(mean=np.array(data["mean"]), std=np.array(data["std"]), static_load=np.array(data["static_load"]))


def quarter_car_targets(raw_inputs: np.ndarray, q: QuarterCarParams) -> np.ndarray:
    """Quarter-car loads (n, 4) for raw input rows."""
    sample = SensorSample.from_matrix(np.zeros(raw_inputs.shape[0]), raw_inputs)
    return quarter_car_force(sample.d_sus, sample.dd_sus, sample.a_unspr, q)


# ========== Checkpoint ==========

@dataclass
class Checkpoint:
    """Everything needed to rerun inference, plus the training curve."""
    method: str
    variant: ModelVariant
    shape: NetworkShape
    zeta: VariationalParams
    normalization: Normalization
    train_config: TrainConfig
    dpc_shape: Optional[DpcShape] = None
    dpc: Optional[np.ndarray] = None
    curve: List[Dict[str, float]] = field(default_factory=list)
    validation_loss: Optional[float] = None

    @property
    def seed(self) -> int:
        return self.train_config.seed

    def to_dict(self) -> dict:
        return {
            "format_version": CHECKPOINT_VERSION,
            "method": self.method,
            "variant": {
                "name": self.variant.name,
                "bayesian": self.variant.bayesian,
                "dpc": self.variant.dpc,
                "ns_dropout": self.variant.ns_dropout,
                "physics": self.variant.physics,
            },
            "shape": {
                "n_inputs": self.shape.n_inputs,
                "width": self.shape.width,
                "n_layers": self.shape.n_layers,
                "n_outputs": self.shape.n_outputs,
                "activation": self.shape.activation,
            },
            "dpc_shape": None if self.dpc_shape is None else {
                "n_inputs": self.dpc_shape.n_inputs,
                "width": self.dpc_shape.width,
                "hidden": self.dpc_shape.hidden,
                "n_hidden_layers": self.dpc_shape.n_hidden_layers,
            },
            "zeta_mu": self.zeta.mu.tolist(),
            "zeta_rho": self.zeta.rho.tolist(),
            "dpc": None if self.dpc is None else self.dpc.tolist(),
            "normalization": self.normalization.to_dict(),
            "train_config": self.train_config.model_dump(mode="json"),
            "seed": self.seed,
            "training_curve": self.curve,
            "validation_loss": self.validation_loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Checkpoint":
        if data.get("format_version") != CHECKPOINT_VERSION:
            raise BenchIoError(f"Unsupported checkpoint format_version {data.get('format_version')}")
        return cls(
            method=data["method"],
            variant=ModelVariant(**data["variant"]),
            shape=NetworkShape(**data["shape"]),
            zeta=VariationalParams(np.array(data["zeta_mu"]), np.array(data["zeta_rho"])),
            normalization=Normalization.from_dict(data["normalization"]),
            train_config=TrainConfig.model_validate(data["train_config"]),
            dpc_shape=None if data["dpc_shape"] is None else DpcShape(**data["dpc_shape"]),
            dpc=None if data["dpc"] is None else np.array(data["dpc"]),
            curve=data["training_curve"],
            validation_loss=data.get("validation_loss"),
        )


def save_checkpoint(checkpoint: Checkpoint, path) -> Path:
    path = Path(path)
    atomic_write_text(path, json.dumps(checkpoint.to_dict(), indent=1, sort_keys=True) + "\n")
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise BenchIoError(f"Checkpoint not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return Checkpoint.from_dict(data)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise BenchIoError(f"Cannot read checkpoint {path}: {exc}") from exc


# ========== Training ==========

@dataclass
class _TrainingData:
    x: np.ndarray
    x_prev: np.ndarray
    y: np.ndarray
    xf: np.ndarray
    xf_prev: np.ndarray
    yf: np.ndarray


def _training_data(dataset: DatasetBundle, norm: Normalization, q: QuarterCarParams) -> _TrainingData:
    train = dataset.train
    xf_raw, xf_prev_raw = dataset.collocation_inputs()
    return _TrainingData(
        x=norm.inputs(train.inputs()),
        x_prev=norm.inputs(train.previous_inputs()),
        y=norm.targets(train.loads().values),
        xf=norm.inputs(xf_raw),
        xf_prev=norm.inputs(xf_prev_raw),
        yf=norm.targets(quarter_car_targets(xf_raw, q)) if len(xf_raw) else np.empty((0, 4)),
    )


def _check_finite(label: str, epoch: int, *values) -> None:
    for value in values:
        if not np.all(np.isfinite(value)):
            raise NonFiniteLoss(f"Non-finite {label} at epoch {epoch}; lower the learning rate or loss weights")


def train_model(
    dataset: DatasetBundle,
    cfg: TrainConfig,
    variant: ModelVariant,
    method: str = "dbpnet",
) -> Checkpoint:
    """
    Mini-batch training of the conditioned network.

    Per batch: K weight samples (one when nothing is stochastic), the data
    term on the labeled batch and the physics term on an equally sized draw
    of collocation rows, KL / |D| when weights are Bayesian, then one Adam
    step on (mu, rho, DPC).
    """
    rng = np.random.default_rng(cfg.seed)
    q = dataset.quarter_car
    static_load = q.corner_arrays()[0]
    norm = Normalization.fit(dataset.train.inputs(), static_load)
    data = _training_data(dataset, norm, q)
    n_rows = data.x.shape[0]
    if n_rows == 0:
        raise EmptyBatch("Training split has no rows")

    shape = NetworkShape(n_inputs=N_INPUTS, width=cfg.width, n_layers=cfg.n_layers)
    mu = pack_layers(init_layers(shape.dims, rng))
    if variant.bayesian:
        rho = rng.uniform(cfg.rho_init[0], cfg.rho_init[1], shape.n_params)
    else:
        rho = np.full(shape.n_params, POINT_RHO)
    params = [mu] + ([rho] if variant.bayesian else [])

    dpc_shape, dpc_flat = None, None
    if variant.dpc:
        dpc_shape = DpcShape(n_inputs=N_INPUTS, width=cfg.width, hidden=cfg.dpc_width, n_hidden_layers=cfg.dpc_layers)
        dpc_flat = dpc_shape.init(rng, cfg.film_init_scale)
        params.append(dpc_flat)
    optimizer = Adam(params, lr=cfg.learning_rate)
    prior = PriorSpec(cfg.prior_std)

    use_physics = variant.physics and cfg.w_p > 0 and data.xf.shape[0] > 0
    stochastic = variant.bayesian or variant.ns_dropout
    k_samples = cfg.mc_samples if stochastic else 1

    curve: List[Dict[str, float]] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_rows)
        sums = {"data_loss": 0.0, "physics_loss": 0.0, "kl": 0.0}
        n_batches = 0
        for start in range(0, n_rows, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            b = len(idx)
            xb, xpb, yb = data.x[idx], data.x_prev[idx], data.y[idx]
            if use_physics:
                fidx = rng.integers(0, data.xf.shape[0], size=b)
                xfb, xfpb, yfb = data.xf[fidx], data.xf_prev[fidx], data.yf[fidx]

            dpc = dpc_shape.unpack(dpc_flat) if variant.dpc else None
            zeta = VariationalParams(mu, rho)
            g_mu = np.zeros_like(mu)
            g_rho = np.zeros_like(mu)
            g_dpc = np.zeros_like(dpc_flat) if variant.dpc else None
            data_terms, physics_terms = [], []

            for _ in range(k_samples):
                if variant.bayesian:
                    eps = rng.standard_normal(shape.n_params)
                    theta = mu + zeta.std * eps
                else:
                    theta = mu
                pred, tape = conditioned_forward(xb, xpb, theta, dpc, cfg.sigma_n, rng, Mode.TRAIN, shape, variant)
                diff = pred - yb
                data_terms.append(float(np.sum(diff ** 2)))
                g_theta, g_d = conditioned_backward(tape, (cfg.w_d / (b * k_samples)) * 2.0 * diff)
                if g_d is not None:
                    g_dpc += g_d

                if use_physics:
                    pred_f, tape_f = conditioned_forward(xfb, xfpb, theta, dpc, cfg.sigma_n, rng, Mode.TRAIN, shape, variant)
                    residual = pred_f - yfb
                    physics_terms.append(float(np.sum(residual ** 2)))
                    g_theta_f, g_df = conditioned_backward(tape_f, (cfg.w_p / (b * k_samples)) * 2.0 * residual)
                    g_theta = g_theta + g_theta_f
                    if g_df is not None:
                        g_dpc += g_df
                else:
                    physics_terms.append(0.0)

                g_mu += g_theta
                if variant.bayesian:
                    g_rho += g_theta * eps * expit(rho)

            kl = 0.0
            if variant.bayesian:
                kl = kl_mean_field(zeta, prior)
                d_mu, d_rho = kl_gradients(zeta, prior)
                g_mu += d_mu / n_rows
                g_rho += d_rho / n_rows

            objective = total_objective(data_terms, physics_terms, kl, cfg, n_rows, b)
            grads = [g_mu] + ([g_rho] if variant.bayesian else []) + ([g_dpc] if variant.dpc else [])
            _check_finite("objective", epoch, objective, *grads)
            optimizer.step(grads)

            sums["data_loss"] += float(np.mean(data_terms)) / b
            sums["physics_loss"] += float(np.mean(physics_terms)) / b
            sums["kl"] += kl
            n_batches += 1

        row = {"epoch": epoch}
        row.update({k: v / n_batches for k, v in sums.items()})
        row["total"] = cfg.w_d * row["data_loss"] + cfg.w_p * row["physics_loss"] + row["kl"] / n_rows
        _check_finite("training curve", epoch, row["total"])
        curve.append(row)

    checkpoint = Checkpoint(
        method=method,
        variant=variant,
        shape=shape,
        zeta=VariationalParams(mu.copy(), rho.copy()),
        normalization=norm,
        train_config=cfg,
        dpc_shape=dpc_shape,
        dpc=None if dpc_flat is None else dpc_flat.copy(),
        curve=curve,
    )
    validation = dataset.validation
    if len(validation):
        mean_net = predict(checkpoint, validation.inputs(), validation.previous_inputs(), samples=1, deterministic=True)
        checkpoint.validation_loss = data_loss(mean_net.mean, validation.loads())
    return checkpoint


def train_dbpnet(dataset: DatasetBundle, cfg: TrainConfig, variant: str = "Full") -> Checkpoint:
    """Algorithm with every component on (or one ablated, by variant name)."""
    return train_model(dataset, cfg, get_variant(variant), method="dbpnet")


def train_pinn(dataset: DatasetBundle, cfg: TrainConfig) -> Checkpoint:
    """Deterministic PINN baseline: no weight sampling, KL, DPC or NS-dropout."""
    return train_model(dataset, cfg, VARIANTS["PINN"], method="pinn")


def train_mlp(dataset: DatasetBundle, cfg: TrainConfig) -> Checkpoint:
    """Data-only regression baseline."""
    return train_model(dataset, cfg, VARIANTS["MLP"], method="mlp")


# ========== Inference ==========

@dataclass
class PredictiveOutput:
    """Posterior-predictive mean loads and per-wheel variance (N^2)."""
    mean: WheelLoads
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def predict(
    checkpoint: Checkpoint,
    x_t: np.ndarray,
    x_prev: np.ndarray,
    samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    deterministic: bool = False,
) -> PredictiveOutput:
    """
    Raw sensor rows in, loads in newtons out. Draws `samples` weight sets
    (Eval mode) and returns their mean and population variance; deterministic
    uses the posterior mean weights once.
    """
    samples = checkpoint.train_config.posterior_samples if samples is None else samples
    if samples < 1:
        raise ShapeError(f"Need at least one posterior sample, got {samples}")
    rng = rng or np.random.default_rng(checkpoint.seed)
    norm = checkpoint.normalization
    x = norm.inputs(np.atleast_2d(x_t))
    xp = norm.inputs(np.atleast_2d(x_prev))
    dpc = checkpoint.dpc_shape.unpack(checkpoint.dpc) if checkpoint.variant.dpc else None

    stochastic = checkpoint.variant.bayesian and not deterministic
    draws = samples if stochastic else 1
    outputs = np.empty((draws, x.shape[0], checkpoint.shape.n_outputs))
    std = checkpoint.zeta.std
    for s in range(draws):
        theta = checkpoint.zeta.mu + std * rng.standard_normal(std.shape) if stochastic else checkpoint.zeta.mu
        pred, _ = conditioned_forward(
            x, xp, theta, dpc, checkpoint.train_config.sigma_n, None, Mode.EVAL, checkpoint.shape, checkpoint.variant
        )
        outputs[s] = norm.loads(pred)
    mean = outputs.mean(axis=0)
    variance = np.mean((outputs - mean) ** 2, axis=0)
    return PredictiveOutput(mean=WheelLoads(mean), variance=variance)


def predict_dbpnet(checkpoint: Checkpoint, x_t: np.ndarray, x_prev: np.ndarray, S: int) -> PredictiveOutput:
    return predict(checkpoint, x_t, x_prev, samples=S)


def predict_split(checkpoint: Checkpoint, split: DatasetSplit, samples: Optional[int] = None) -> PredictiveOutput:
    return predict(checkpoint, split.inputs(), split.previous_inputs(), samples=samples)


# ========== Metrics ==========

@dataclass(frozen=True)
class Metrics:
    """Per-wheel RMSE / MaxError (N); aggregates are means over the wheels."""
    rmse_per_wheel: np.ndarray
    max_error_per_wheel: np.ndarray

    @property
    def rmse(self) -> float:
        return float(np.mean(self.rmse_per_wheel))

    @property
    def max_error(self) -> float:
        return float(np.mean(self.max_error_per_wheel))


def evaluate(pred: LossInput, truth: LossInput) -> Metrics:
    pred, truth = _loads_array(pred), _loads_array(truth)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"Prediction shape {pred.shape} does not match truth {truth.shape}")
    if pred.shape[0] == 0:
        raise EmptyBatch("Cannot evaluate an empty series")
    error = pred - truth
    return Metrics(
        rmse_per_wheel=np.sqrt(np.mean(error ** 2, axis=0)),
        max_error_per_wheel=np.max(np.abs(error), axis=0),
    )


def evaluate_by_class(pred: LossInput, split: DatasetSplit) -> Dict[str, Metrics]:
    """Metrics per scenario class present in the split plus 'All'."""
    pred = _loads_array(pred)
    truth = split.loads().values
    classes = split.scenario_classes()
    result = {name: evaluate(pred[classes == name], truth[classes == name]) for name in split.classes()}
    result["All"] = evaluate(pred, truth)
    return result


# ========== Ablation ==========

ABLATION_VARIANTS = ("Full", "NoPhysicsLoss", "NoBayesian", "NoDPC")


@dataclass
class AblationResult:
    variant: str
    seed: int
    metrics: Dict[str, Metrics]
    wall_clock_s: float


def ablate(dataset: DatasetBundle, cfg: TrainConfig, variant: str, seed: Optional[int] = None) -> AblationResult:
    """Train one variant and evaluate it on the test split."""
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    started = time.perf_counter()
    checkpoint = train_dbpnet(dataset, cfg, variant)
    test = dataset.test
    output = predict_split(checkpoint, test)
    return AblationResult(
        variant=variant,
        seed=cfg.seed,
        metrics=evaluate_by_class(output.mean, test),
        wall_clock_s=time.perf_counter() - started,
    )


def _ablation_job(job: Tuple[DatasetBundle, TrainConfig, str, int]) -> AblationResult:
    return ablate(*job)


def run_ablation(
    dataset: DatasetBundle,
    cfg: TrainConfig,
    variants: Sequence[str] = ABLATION_VARIANTS,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    workers: int = 1,
) -> List[AblationResult]:
    """Every (variant, seed) pair, in variant-major order regardless of worker count."""
    for name in variants:
        get_variant(name)
    jobs = [(dataset, cfg, v, s) for v in variants for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_ablation_job, jobs))
    return [_ablation_job(job) for job in jobs]
