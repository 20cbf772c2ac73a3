"""WGAN-GP training of the patch quantum generator against the MLP critic.

Each generator iteration runs ``n_critic`` critic updates followed by one
generator update, all with Adam. Real samples are drawn uniformly with
replacement; every random draw comes from a single seeded generator, so a
run is bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import critic as C
from . import generator as G
from .data import LabeledDataset
from .errors import ConfigError, PostSelectionError


@dataclass(frozen=True)
class TrainConfig:
    lambda_gp: float = 10.0
    n_critic: int = 5
    batch_size: int = 25
    generator_iterations: int = 600
    lr_generator: float = 0.01
    lr_critic: float = 0.0002
    beta1: float = 0.0
    beta2: float = 0.9
    adam_epsilon: float = 1e-8
    prior_kind: str = "uniform01"
    seed: int = 0
    checkpoint_every: int = 50

    def __post_init__(self):
        if self.n_critic < 1 or self.batch_size < 1 or self.generator_iterations < 0:
            raise ConfigError("n_critic and batch_size must be >= 1, generator_iterations >= 0")
        if self.lambda_gp < 0:
            raise ConfigError("lambda_gp must be >= 0")
        if self.prior_kind not in G.PRIOR_KINDS:
            raise ConfigError(f"prior_kind must be one of {G.PRIOR_KINDS}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LogRecord:
    kind: str  # "critic" or "generator"
    iteration: int
    loss: float
    penalty: float = math.nan
    wasserstein: float = math.nan


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)

    def critic(self) -> list:
        return [r for r in self.records if r.kind == "critic"]

    def generator(self) -> list:
        return [r for r in self.records if r.kind == "generator"]

    def wasserstein(self) -> np.ndarray:
        return np.array([r.wasserstein for r in self.generator()])


class TrainingAborted(RuntimeError):
    def __init__(self, message, log: TrainingLog, iteration: int):
        super().__init__(message)
        self.log = log
        self.iteration = iteration


def sample_prior(kind: str, dim: int, rng: np.random.Generator, size: int | None = None):
    if dim < 1:
        raise ConfigError("latent dimension must be >= 1")
    shape = (dim,) if size is None else (size, dim)
    if kind == "uniform01":
        return rng.random(shape)
    if kind == "standard_normal":
        return rng.standard_normal(shape)
    raise ConfigError(f"prior_kind must be one of {G.PRIOR_KINDS}, got {kind!r}")


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_update(state: AdamState, params, grads, lr, beta1, beta2, eps=1e-8):
    """One bias-corrected Adam step. Returns (new params, new state)."""
    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ConfigError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * (g * g)
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)


def _real_batch(dataset: LabeledDataset, m: int, rng) -> np.ndarray:
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")
    return dataset.images[rng.integers(0, len(dataset), size=m)]


def critic_update(w, adam_w, x, x_fake, eps, tconfig, iteration=0):
    """Adam step on the batch-mean critic loss D(x') - D(x) + penalty."""
    m = len(x)
    d_real = C.critic_forward_batch(w, x)
    d_fake = C.critic_forward_batch(w, x_fake)
    penalty, g_pen = C.gradient_penalty_batch(w, x, x_fake, eps, tconfig.lambda_gp)
    loss = d_fake - d_real + penalty

    g_fake = C.critic_backward(w, x_fake, np.ones(m))
    g_real = C.critic_backward(w, x, -np.ones(m))
    grads = [a + b + c for a, b, c in zip(g_fake.arrays(), g_real.arrays(), g_pen.arrays())]
    arrays, adam_w = adam_update(
        adam_w, w.arrays(), grads, tconfig.lr_critic, tconfig.beta1, tconfig.beta2,
        tconfig.adam_epsilon,
    )
    record = LogRecord(
        "critic", iteration, float(np.mean(loss)), float(np.mean(penalty)),
        float(np.mean(d_real) - np.mean(d_fake)),
    )
    return w.with_arrays(arrays), adam_w, record


def critic_step(w, adam_w, theta, gconfig, tconfig, rng, dataset, iteration=0):
    m = tconfig.batch_size
    x = _real_batch(dataset, m, rng)
    zs = sample_prior(tconfig.prior_kind, gconfig.n_qubits, rng, size=m)
    eps = rng.random(m)
    x_fake = G.generate_batch(theta, zs, gconfig)
    return critic_update(w, adam_w, x, x_fake, eps, tconfig, iteration)


def generator_step(theta, adam_theta, w, gconfig, tconfig, rng, dataset=None, iteration=0):
    """One generator update. With ``dataset`` given, a real batch is drawn
    after the update's samples to log mean D(x) - mean D(x')."""
    m = tconfig.batch_size
    zs = sample_prior(tconfig.prior_kind, gconfig.n_qubits, rng, size=m)
    x_fake = G.generate_batch(theta, zs, gconfig)
    d_fake = C.critic_forward_batch(w, x_fake)
    upstream = -C.critic_input_grad_batch(w, x_fake) / m
    grad = G.generator_backward_batch(theta, zs, gconfig, upstream)
    (theta_new,), adam_theta = adam_update(
        adam_theta, [theta], [grad], tconfig.lr_generator, tconfig.beta1, tconfig.beta2,
        tconfig.adam_epsilon,
    )
    wd = math.nan
    if dataset is not None:
        wd = float(np.mean(C.critic_forward_batch(w, _real_batch(dataset, m, rng))) - np.mean(d_fake))
    record = LogRecord("generator", iteration, float(-np.mean(d_fake)), math.nan, wd)
    return theta_new, adam_theta, record


@dataclass
class TrainResult:
    log: TrainingLog
    theta: np.ndarray
    critic: C.MLP
    adam_theta: AdamState
    adam_critic: AdamState


def train(
    tconfig: TrainConfig,
    gconfig: G.GeneratorConfig,
    dataset: LabeledDataset,
    checkpoint: Callable | None = None,
    on_record: Callable | None = None,
    theta: np.ndarray | None = None,
    w: C.MLP | None = None,
) -> TrainResult:
    """Run ``generator_iterations`` rounds of (n_critic critic steps, one
    generator step).

    ``checkpoint(iteration, theta, critic)`` is called every
    ``checkpoint_every`` iterations and after the last one. On a
    post-selection failure a :class:`TrainingAborted` carrying the partial
    log is raised.
    """
    if dataset.image_shape != (gconfig.image_height, gconfig.image_width):
        raise ConfigError(
            f"dataset images {dataset.image_shape} do not match generator "
            f"{gconfig.image_height}x{gconfig.image_width}"
        )
    dataset = dataset.to_range("unit")
    rng = np.random.default_rng(tconfig.seed)
    if theta is None:
        theta = G.init_params(gconfig, rng)
    if w is None:
        w = C.init_critic(rng, gconfig.image_height * gconfig.image_width)
    adam_theta = AdamState.zeros([theta])
    adam_w = AdamState.zeros(w.arrays())
    log = TrainingLog()

    def emit(record):
        log.records.append(record)
        if on_record is not None:
            on_record(record)

    for it in range(1, tconfig.generator_iterations + 1):
        try:
            for _ in range(tconfig.n_critic):
                w, adam_w, rec = critic_step(w, adam_w, theta, gconfig, tconfig, rng, dataset, it)
                emit(rec)
            theta, adam_theta, rec = generator_step(
                theta, adam_theta, w, gconfig, tconfig, rng, dataset, it
            )
            emit(rec)
        except PostSelectionError as err:
            raise TrainingAborted(
                f"iteration {it}, patch {err.patch}, batch sample {err.sample}, "
                f"seed {tconfig.seed}: {err}",
                log, it,
            ) from err
        if checkpoint is not None and (
            it % tconfig.checkpoint_every == 0 or it == tconfig.generator_iterations
        ):
            checkpoint(it, theta, w)
    return TrainResult(log, theta, w, adam_theta, adam_w)


def interpolate(theta, gconfig: G.GeneratorConfig, z_a, z_b, segments: int = 10) -> np.ndarray:
    """Images at ``segments + 1`` evenly spaced points from z_a to z_b."""
    if segments < 1:
        raise ConfigError("segments must be >= 1")
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.shape != z_b.shape:
        raise ConfigError(f"latent endpoints differ in shape: {z_a.shape} vs {z_b.shape}")
    s = (np.arange(segments + 1) / segments)[:, None]
    zs = z_a + s * (z_b - z_a)
    # the last point is pinned so both endpoints are exact
    zs[-1] = z_b
    return G.generate_batch(theta, zs, gconfig)
