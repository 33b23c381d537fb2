"""Training loop: three-phase sparsity schedule, Adam, per-step metrics.

The loss is L = L_x + gamma * L_z where gamma follows the schedule
warmup(0) -> cosine ramp -> plateau(gamma_inf) across the three phases.
The FREE variant never builds a sparsity loss at all: with gamma pinned to
zero there is nothing to weight, and keeping the term out of the graph is
what the loss-path isolation test relies on.

Everything is deterministic given the config seed: data order, mu prompts,
parameter init, and the reduction order inside every op are all fixed, so
two runs of the same config produce bitwise-identical metric logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..codec import cost_time as _cost_time_metrics
from ..errors import DivergenceError, DomainError, ShapeError
from .autodiff import Tensor
from .losses import loss_reconstruction, loss_sparsity, loss_sparsity_mu
from .model import ModelConfig, ToyAutoencoder


class Variant(Enum):
    FREE = "free"
    SPARSE = "sparse"
    MU_SPARSE = "mu-sparse"


@dataclass(frozen=True)
class TrainConfig:
    variant: Variant = Variant.FREE
    b0: float = 5500.0
    gamma_inf: float = 3e-4
    phase_steps: tuple[int, int, int] = (8000, 6000, 6000)
    lr: float = 1e-3
    seed: int = 0
    batch_size: int = 4
    n_units: int = 32
    t_z: int = 256
    features: int = 64
    hidden: int = 32
    mu_sites: str = "both"
    dtype: str = "float32"

    def __post_init__(self):
        if self.gamma_inf < 0:
            raise DomainError("gamma_inf must be >= 0")
        if len(self.phase_steps) != 3 or min(self.phase_steps) < 0 or sum(self.phase_steps) < 1:
            raise DomainError("phase_steps must be three non-negative counts summing to >= 1")
        if self.batch_size < 1 or self.lr <= 0:
            raise DomainError("batch_size must be >= 1 and lr > 0")

    @property
    def total_steps(self) -> int:
        return sum(self.phase_steps)

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            n_units=self.n_units,
            features=self.features,
            hidden=self.hidden,
            mu_sites=self.mu_sites,
            dtype=self.dtype,
        )


def gamma_schedule(step: int, cfg: TrainConfig) -> float:
    """Sparsity weight at ``step``: 0, then a half-cosine ramp, then gamma_inf."""
    if not 0 <= step < cfg.total_steps:
        raise DomainError(f"step {step} outside 0..{cfg.total_steps - 1}")
    if cfg.variant is Variant.FREE:
        return 0.0
    p1, p2, _ = cfg.phase_steps
    if step < p1:
        return 0.0
    if step < p1 + p2:
        frac = (step + 1 - p1) / p2
        return cfg.gamma_inf * 0.5 * (1.0 - math.cos(math.pi * frac))
    return cfg.gamma_inf


class Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, params: list[Tensor], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        scale = self.lr * math.sqrt(1.0 - self.beta2**self.t) / (1.0 - self.beta1**self.t)
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= scale * m / (np.sqrt(v) + self.eps)


METRICS_HEADER = ("step", "loss_x", "loss_z", "gamma", "mean_S", "density", "bits_exact")


@dataclass
class MetricsLog:
    """Per-step training trace; ``bits_exact`` is the batch-mean exact-mode
    compressed-time cost of z (observability only, not part of any loss)."""

    rows: list[tuple] = field(default_factory=list)

    def append(self, *values) -> None:
        self.rows.append(tuple(values))

    def column(self, name: str) -> list:
        i = METRICS_HEADER.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        lines = [",".join(METRICS_HEADER)]
        for row in self.rows:
            lines.append(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row))
        return "\n".join(lines) + "\n"


def train(cfg: TrainConfig, features: np.ndarray) -> tuple[ToyAutoencoder, MetricsLog]:
    """Train a fresh model on ``features`` of shape (n_samples, F, T_z)."""
    feats = np.asarray(features)
    if feats.ndim != 3 or feats.shape[1] != cfg.features or feats.shape[2] != cfg.t_z:
        raise ShapeError(f"expected (n, {cfg.features}, {cfg.t_z}) features, got {feats.shape}")
    feats = feats.astype(cfg.dtype, copy=False)
    n_samples = feats.shape[0]
    cells = cfg.n_units * cfg.t_z

    model = ToyAutoencoder(cfg.model_config(), seed=cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed + 1)
    log = MetricsLog()

    for step in range(cfg.total_steps):
        idx = rng.integers(0, n_samples, size=cfg.batch_size)
        x = Tensor(feats[idx])
        mu = rng.integers(0, 32, size=cfg.batch_size) if cfg.variant is Variant.MU_SPARSE else None

        z, x_hat, _ = model.forward(x, mu=mu, training=True)
        l_x = loss_reconstruction(x, x_hat)
        gamma = gamma_schedule(step, cfg)
        if cfg.variant is Variant.FREE:
            l_z_value = 0.0
            total = l_x
        else:
            if cfg.variant is Variant.SPARSE:
                l_z = loss_sparsity(z, cfg.n_units, cfg.t_z, cfg.b0)
            else:
                l_z = loss_sparsity_mu(z, cfg.n_units, cfg.t_z, mu)
            l_z_value = float(l_z.data)
            total = l_x + l_z.scale(gamma)

        l_x_value = float(l_x.data)
        if not (math.isfinite(l_x_value) and math.isfinite(l_z_value)):
            raise DivergenceError(
                f"non-finite loss at step {step}: loss_x={l_x_value}, loss_z={l_z_value}"
            )

        model.zero_grad()
        total.backward()
        opt.step()

        counts = z.data.reshape(cfg.batch_size, -1).sum(axis=1)
        mean_s = float(counts.mean())
        bits = float(np.mean([_cost_time_metrics(cfg.n_units, cfg.t_z, int(s), mode="exact") for s in counts]))
        log.append(step, l_x_value, l_z_value, gamma, mean_s, mean_s / cells, bits)

    return model, log
