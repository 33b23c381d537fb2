"""Training objectives for the binary bottleneck.

The reconstruction loss is plain mean squared error.  The two sparsity
losses are functions of the event count S = sum(z); their backward passes
deliberately treat the piecewise-constant bit-width factors as constants
and push a uniform d(loss)/dS into every entry of z, where the binarizer's
surrogate takes over.  ``cost_time`` is looked up through this module's
namespace on every call so tests can intercept the loss path; nothing else
in training is allowed to route through it.
"""

from __future__ import annotations

import numpy as np

from ..codec import cost_time, width
from ..errors import DomainError
from .autodiff import Tensor


def loss_reconstruction(x_frames: Tensor, x_hat: Tensor) -> Tensor:
    """Mean squared error over all entries."""
    if x_frames.shape != x_hat.shape:
        raise DomainError(f"shape mismatch: {x_frames.shape} vs {x_hat.shape}")
    diff = x_frames - x_hat
    return (diff * diff).mean()


def _per_sample_counts(z: Tensor, n_units: int, n_steps: int) -> np.ndarray:
    if z.data.shape[-2:] != (n_units, n_steps):
        raise DomainError(f"z trailing shape {z.data.shape[-2:]} != ({n_units}, {n_steps})")
    flat = z.data.reshape(-1, n_units * n_steps)
    return flat.sum(axis=1)


def loss_sparsity(z: Tensor, n_units: int, n_steps: int, b0: float) -> Tensor:
    """Compressed-time bits above the budget b0, averaged over the batch.

    Forward value is max(0, cost_time(N, T, S, exact) - b0) per sample.
    Backward differentiates only the S*width(T) term, gated off for samples
    already under budget; the offset-table term changes in steps of width
    and carries no usable slope.
    """
    if b0 < 0:
        raise DomainError("b0 must be >= 0")
    counts = _per_sample_counts(z, n_units, n_steps)
    bits = np.array([cost_time(n_units, n_steps, int(s), mode="exact") for s in counts], dtype=np.float64)
    over = bits - b0
    value = np.maximum(over, 0.0).mean()
    slope = width(n_steps) * (over > 0).astype(z.data.dtype) / len(counts)

    def backward(g):
        per_entry = np.broadcast_to(slope.reshape(-1, 1, 1), (len(counts), n_units, n_steps))
        z._accumulate((g * per_entry).reshape(z.data.shape).astype(z.data.dtype, copy=False))

    return Tensor._make(np.asarray(value, dtype=z.data.dtype), (z,), backward)


def target_event_count(n_units: int, n_steps: int, mu: int) -> float:
    """S_0(mu) = N * T * 2^(-mu/4)."""
    return n_units * n_steps * 2.0 ** (-mu / 4.0)


def loss_sparsity_mu(z: Tensor, n_units: int, n_steps: int, mu) -> Tensor:
    """|S - S_0(mu)| per sample, averaged over the batch.

    ``mu`` is one integer for a single sample or an array matched to the
    batch axis.  Backward pushes sign(S - S_0) uniformly into z.
    """
    counts = _per_sample_counts(z, n_units, n_steps)
    mu_arr = np.broadcast_to(np.asarray(mu, dtype=np.int64), counts.shape)
    if mu_arr.min() < 0 or mu_arr.max() > 31:
        raise DomainError("mu must lie in 0..31")
    targets = np.array([target_event_count(n_units, n_steps, int(m)) for m in mu_arr])
    gaps = counts - targets
    value = np.abs(gaps).mean()
    slope = (np.sign(gaps) / len(counts)).astype(z.data.dtype)

    def backward(g):
        per_entry = np.broadcast_to(slope.reshape(-1, 1, 1), (len(counts), n_units, n_steps))
        z._accumulate((g * per_entry).reshape(z.data.shape).astype(z.data.dtype, copy=False))

    return Tensor._make(np.asarray(value, dtype=z.data.dtype), (z,), backward)
