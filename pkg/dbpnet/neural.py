# -*- coding: utf-8 -*-
"""
Numpy network substrate for the wheel-load estimators.

Dense tanh layers with hand-written reverse-mode gradients, mean-field
Gaussian weights (softplus std), closed-form KL to an isotropic prior,
bounded multiplicative noise (NS-dropout) and the dynamic physical
conditioning encoder (DPC) that emits one FiLM pair shared by every hidden
layer. Parameters live in flat vectors; shapes know how to unpack them.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from dbpnet.validation import ConfigError, ShapeError


Layer = Tuple[np.ndarray, np.ndarray]  # (W of shape (out, in), b of shape (out,))

# NS-dropout factors stay strictly inside (0.5, 1)
FACTOR_LOW = np.nextafter(0.5, 1.0)
FACTOR_HIGH = np.nextafter(1.0, 0.0)
EVAL_FACTOR = 0.75


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class ModelVariant:
    """Which DBPnet components are switched on."""
    name: str
    bayesian: bool = True
    dpc: bool = True
    ns_dropout: bool = True
    physics: bool = True


VARIANTS: Dict[str, ModelVariant] = {
    "Full": ModelVariant("Full"),
    "NoPhysicsLoss": ModelVariant("NoPhysicsLoss", physics=False),
    "NoBayesian": ModelVariant("NoBayesian", bayesian=False, ns_dropout=False),
    "NoDPC": ModelVariant("NoDPC", dpc=False),
    "PINN": ModelVariant("PINN", bayesian=False, dpc=False, ns_dropout=False),
    "MLP": ModelVariant("MLP", bayesian=False, dpc=False, ns_dropout=False, physics=False),
}


def get_variant(name: str) -> ModelVariant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ConfigError(f"Unknown model variant '{name}'. Known: {sorted(VARIANTS)}") from None


# ========== Flat Parameter Layout ==========

def _n_params(dims: Sequence[Tuple[int, int]]) -> int:
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in dims)


def unpack_layers(dims: Sequence[Tuple[int, int]], flat: np.ndarray) -> List[Layer]:
    """Views into flat, one (W, b) per (fan_in, fan_out)."""
    flat = np.asarray(flat)
    if flat.shape != (_n_params(dims),):
        raise ShapeError(f"Expected {_n_params(dims)} parameters, got shape {flat.shape}")
    layers, offset = [], 0
    for fan_in, fan_out in dims:
        W = flat[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
        offset += fan_in * fan_out
        b = flat[offset:offset + fan_out]
        offset += fan_out
        layers.append((W, b))
    return layers


def pack_layers(layers: Sequence[Layer]) -> np.ndarray:
    return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in layers])


def init_layers(dims: Sequence[Tuple[int, int]], rng: np.random.Generator) -> List[Layer]:
    """W ~ N(0, 1/fan_in), b = 0."""
    return [
        (rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_out, fan_in)), np.zeros(fan_out))
        for fan_in, fan_out in dims
    ]


@dataclass(frozen=True)
class NetworkShape:
    """Main network: n_layers hidden tanh layers of equal width, then a linear head."""
    n_inputs: int
    width: int
    n_layers: int
    n_outputs: int = 4
    activation: str = "tanh"

    def __post_init__(self):
        if self.n_layers < 1 or self.width < 1 or self.n_inputs < 1 or self.n_outputs < 1:
            raise ConfigError(f"Invalid network shape {self}")
        if self.activation != "tanh":
            raise ConfigError(f"Unsupported activation '{self.activation}'")

    @property
    def dims(self) -> List[Tuple[int, int]]:
        return [(self.n_inputs, self.width)] + [(self.width, self.width)] * (self.n_layers - 1) + [(self.width, self.n_outputs)]

    @property
    def n_params(self) -> int:
        return _n_params(self.dims)

    def unpack(self, theta: np.ndarray) -> List[Layer]:
        return unpack_layers(self.dims, theta)


@dataclass(frozen=True)
class DpcShape:
    """DPC encoder: MLP_D on [dx, x], MLP_g on x, both ending at the main width, then width -> 2*width."""
    n_inputs: int
    width: int
    hidden: int
    n_hidden_layers: int

    def __post_init__(self):
        if self.n_hidden_layers < 1 or self.hidden < 1 or self.width < 1:
            raise ConfigError(f"Invalid DPC shape {self}")

    def _mlp_dims(self, fan_in: int) -> List[Tuple[int, int]]:
        return [(fan_in, self.hidden)] + [(self.hidden, self.hidden)] * (self.n_hidden_layers - 1) + [(self.hidden, self.width)]

    @property
    def dims_d(self) -> List[Tuple[int, int]]:
        return self._mlp_dims(2 * self.n_inputs)

    @property
    def dims_g(self) -> List[Tuple[int, int]]:
        return self._mlp_dims(self.n_inputs)

    @property
    def dims_head(self) -> List[Tuple[int, int]]:
        return [(self.width, 2 * self.width)]

    @property
    def n_params(self) -> int:
        return _n_params(self.dims_d) + _n_params(self.dims_g) + _n_params(self.dims_head)

    def unpack(self, flat: np.ndarray) -> "DpcParams":
        flat = np.asarray(flat)
        if flat.shape != (self.n_params,):
            raise ShapeError(f"Expected {self.n_params} DPC parameters, got shape {flat.shape}")
        n_d, n_g = _n_params(self.dims_d), _n_params(self.dims_g)
        return DpcParams(
            mlp_d=unpack_layers(self.dims_d, flat[:n_d]),
            mlp_g=unpack_layers(self.dims_g, flat[n_d:n_d + n_g]),
            head=unpack_layers(self.dims_head, flat[n_d + n_g:])[0],
        )

    def init(self, rng: np.random.Generator, film_init_scale: float = 1e-3) -> np.ndarray:
        """Fresh parameters whose head starts at gamma = 1, beta = 0."""
        head_W = rng.normal(0.0, film_init_scale, (2 * self.width, self.width)) if film_init_scale > 0 else np.zeros((2 * self.width, self.width))
        head_b = np.concatenate([np.ones(self.width), np.zeros(self.width)])
        params = DpcParams(
            mlp_d=init_layers(self.dims_d, rng),
            mlp_g=init_layers(self.dims_g, rng),
            head=(head_W, head_b),
        )
        return params.pack()


@dataclass
class DpcParams:
    mlp_d: List[Layer]
    mlp_g: List[Layer]
    head: Layer

    def pack(self) -> np.ndarray:
        return np.concatenate([pack_layers(self.mlp_d), pack_layers(self.mlp_g), pack_layers([self.head])])


@dataclass
class FilmPair:
    gamma: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if np.shape(self.gamma) != np.shape(self.beta):
            raise ShapeError(f"gamma {np.shape(self.gamma)} and beta {np.shape(self.beta)} differ in shape")


@dataclass
class VariationalParams:
    """Mean-field Gaussian posterior: theta_i ~ N(mu_i, softplus(rho_i)^2)."""
    mu: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.mu.shape != self.rho.shape:
            raise ShapeError(f"mu {self.mu.shape} and rho {self.rho.shape} differ in shape")

    @property
    def std(self) -> np.ndarray:
        return softplus(self.rho)


@dataclass(frozen=True)
class PriorSpec:
    std: float = 1.0

    def __post_init__(self):
        if not self.std > 0:
            raise ConfigError(f"Prior std must be positive, got {self.std}")


# ========== Variational Layer ==========

def variational_sample(zeta: VariationalParams, eps: np.ndarray) -> np.ndarray:
    """theta = mu + softplus(rho) * eps."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != zeta.mu.shape:
        raise ShapeError(f"eps has shape {eps.shape}, parameters have {zeta.mu.shape}")
    return zeta.mu + zeta.std * eps


def kl_mean_field(zeta: VariationalParams, prior: PriorSpec) -> float:
    """Closed-form KL(N(mu, s^2) || N(0, prior^2)) summed over parameters."""
    s = zeta.std
    p = prior.std
    return float(np.sum(np.log(p / s) + (s ** 2 + zeta.mu ** 2) / (2.0 * p ** 2) - 0.5))


def kl_gradients(zeta: VariationalParams, prior: PriorSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(dKL/dmu, dKL/drho)."""
    s = zeta.std
    p2 = prior.std ** 2
    d_s = -1.0 / s + s / p2
    return zeta.mu / p2, d_s * expit(zeta.rho)


# ========== Modulation ==========

def ns_dropout(x: np.ndarray, sigma_n: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Multiply x by factors 0.5 * sigmoid(h) + 0.5 with h ~ N(0, sigma_n^2)."""
    if sigma_n < 0:
        raise ConfigError(f"sigma_n must be non-negative, got {sigma_n}")
    x = np.asarray(x, dtype=float)
    h = rng.normal(0.0, sigma_n, x.shape)
    factor = np.clip(0.5 * expit(h) + 0.5, FACTOR_LOW, FACTOR_HIGH)
    return x * factor, factor


def film_modulate(F: np.ndarray, fp: FilmPair) -> np.ndarray:
    """gamma * F + beta."""
    if np.shape(F) != np.shape(fp.gamma):
        raise ShapeError(f"Activation shape {np.shape(F)} does not match FiLM shape {np.shape(fp.gamma)}")
    return fp.gamma * F + fp.beta


# ========== Dense Blocks ==========

def mlp_forward(layers: Sequence[Layer], x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """tanh hidden layers, linear last layer; cache holds each layer's input."""
    cache = []
    h = x
    for i, (W, b) in enumerate(layers):
        cache.append(h)
        z = h @ W.T + b
        h = np.tanh(z) if i < len(layers) - 1 else z
    return h, cache


def mlp_backward(layers: Sequence[Layer], cache: List[np.ndarray], d_out: np.ndarray) -> Tuple[List[Layer], np.ndarray]:
    grads: List[Layer] = [None] * len(layers)
    d = d_out
    for i in reversed(range(len(layers))):
        W, _ = layers[i]
        h_in = cache[i]
        grads[i] = (d.T @ h_in, d.sum(axis=0))
        d = d @ W
        if i > 0:
            # cache[i] is tanh output of layer i-1
            d = d * (1.0 - h_in ** 2)
    return grads, d


@dataclass
class DpcTape:
    d_cache: List[np.ndarray]
    g_cache: List[np.ndarray]
    D: np.ndarray
    g: np.ndarray
    u: np.ndarray


def _dpc_tape(x_t: np.ndarray, x_prev: np.ndarray, p: DpcParams) -> Tuple[FilmPair, DpcTape]:
    dx = x_t - x_prev
    D, d_cache = mlp_forward(p.mlp_d, np.concatenate([dx, x_t], axis=1))
    z_g, g_cache = mlp_forward(p.mlp_g, x_t)
    g = expit(z_g)
    u = g * D
    W, b = p.head
    out = u @ W.T + b
    width = D.shape[1]
    return FilmPair(out[:, :width], out[:, width:]), DpcTape(d_cache, g_cache, D, g, u)


def dpc_forward(x_t: np.ndarray, x_prev: np.ndarray, p: DpcParams) -> FilmPair:
    """(gamma, beta) = Linear(sigmoid(MLP_g(x_t)) * MLP_D([x_t - x_prev, x_t]))."""
    x_t = np.atleast_2d(x_t)
    x_prev = np.atleast_2d(x_prev)
    if x_t.shape != x_prev.shape:
        raise ShapeError(f"x_t {x_t.shape} and x_prev {x_prev.shape} differ in shape")
    return _dpc_tape(x_t, x_prev, p)[0]


def dpc_backward(tape: DpcTape, p: DpcParams, d_gamma: np.ndarray, d_beta: np.ndarray) -> DpcParams:
    d_out = np.concatenate([d_gamma, d_beta], axis=1)
    W, _ = p.head
    head = (d_out.T @ tape.u, d_out.sum(axis=0))
    du = d_out @ W
    d_D = du * tape.g
    d_zg = du * tape.D * tape.g * (1.0 - tape.g)
    grads_d, _ = mlp_backward(p.mlp_d, tape.d_cache, d_D)
    grads_g, _ = mlp_backward(p.mlp_g, tape.g_cache, d_zg)
    return DpcParams(mlp_d=grads_d, mlp_g=grads_g, head=head)


# ========== Conditioned Network ==========

@dataclass
class ForwardTape:
    layers: List[Layer]
    inputs: List[np.ndarray] = field(default_factory=list)
    activations: List[np.ndarray] = field(default_factory=list)
    factors: List[np.ndarray] = field(default_factory=list)
    film: Optional[FilmPair] = None
    dpc: Optional[DpcParams] = None
    dpc_tape: Optional[DpcTape] = None
    last_hidden: Optional[np.ndarray] = None


def conditioned_forward(
    x_t: np.ndarray,
    x_prev: np.ndarray,
    theta: np.ndarray,
    dpc: Optional[DpcParams],
    sigma_n: float,
    rng: Optional[np.random.Generator],
    mode: Mode,
    shape: NetworkShape,
    variant: ModelVariant = VARIANTS["Full"],
) -> Tuple[np.ndarray, ForwardTape]:
    """
    Per hidden layer: affine, tanh, FiLM with the shared (gamma, beta), then
    NS-dropout (random in Train, its mean 0.75 in Eval). Output layer is affine.
    Returns normalized predictions (n, 4) and the tape for backward.
    """
    x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
    x_prev = np.atleast_2d(np.asarray(x_prev, dtype=float))
    if x_t.shape[1] != shape.n_inputs or x_prev.shape != x_t.shape:
        raise ShapeError(f"Inputs {x_t.shape} / {x_prev.shape} do not fit {shape.n_inputs} channels")
    layers = shape.unpack(theta)
    tape = ForwardTape(layers=layers)

    n = x_t.shape[0]
    if variant.dpc:
        if dpc is None:
            raise ConfigError("Variant needs DPC parameters")
        film, tape.dpc_tape = _dpc_tape(x_t, x_prev, dpc)
        tape.dpc = dpc
    else:
        film = FilmPair(np.ones((n, shape.width)), np.zeros((n, shape.width)))
    tape.film = film

    h = x_t
    for W, b in layers[:-1]:
        tape.inputs.append(h)
        a = np.tanh(h @ W.T + b)
        m = film_modulate(a, film)
        if not variant.ns_dropout:
            factor = np.ones_like(m)
        elif mode == Mode.TRAIN:
            _, factor = ns_dropout(m, sigma_n, rng)
        else:
            factor = np.full_like(m, EVAL_FACTOR)
        tape.activations.append(a)
        tape.factors.append(factor)
        h = m * factor
    W_out, b_out = layers[-1]
    tape.last_hidden = h
    return h @ W_out.T + b_out, tape


def conditioned_backward(tape: ForwardTape, d_out: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Gradients of sum(d_out * output) w.r.t. theta (flat) and the DPC parameters (flat, or None)."""
    layers = tape.layers
    W_out, _ = layers[-1]
    grads: List[Layer] = [None] * len(layers)
    grads[-1] = (d_out.T @ tape.last_hidden, d_out.sum(axis=0))
    dh = d_out @ W_out

    d_gamma = np.zeros_like(tape.film.gamma)
    d_beta = np.zeros_like(tape.film.beta)
    for l in reversed(range(len(layers) - 1)):
        W, _ = layers[l]
        a = tape.activations[l]
        dm = dh * tape.factors[l]
        d_gamma += dm * a
        d_beta += dm
        dz = dm * tape.film.gamma * (1.0 - a ** 2)
        grads[l] = (dz.T @ tape.inputs[l], dz.sum(axis=0))
        dh = dz @ W

    d_theta = pack_layers(grads)
    if tape.dpc_tape is None:
        return d_theta, None
    return d_theta, dpc_backward(tape.dpc_tape, tape.dpc, d_gamma, d_beta).pack()


# ========== Optimizer ==========

class Adam:
    """Adam over a list of flat arrays, updated in place."""

    def __init__(self, params: List[np.ndarray], lr: float = 1e-3, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: List[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeError(f"{len(grads)} gradients for {len(self.params)} parameter arrays")
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g ** 2
            m_hat = self.m[i] / (1.0 - self.b1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
