"""Binary-bottleneck autoencoder over feature frames.

The encoder is a small temporal convolution stack, followed by one
single-head global self-attention mixer (full-clip receptive field), a
linear head onto the unit axis, per-unit batch normalisation, and a hard
step.  The decoder mirrors it: attention mixer over the binary matrix, then
a convolution stack back to feature frames.  An optional integer prompt mu
selects one of 32 learnable embedding rows that are added at the encoder
output and/or the decoder input.

Everything runs on the local autodiff engine; the forward pass works on a
single (features, steps) sample or a batch of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ShapeError
from ..event_matrix import EventMatrix
from .autodiff import Tensor, batch_norm, conv1d

MU_SITES = ("encoder", "decoder", "both")


@dataclass(frozen=True)
class ModelConfig:
    """Shape hyperparameters; time length is not fixed by the model."""

    n_units: int = 32
    features: int = 64
    hidden: int = 32
    kernel: int = 5
    n_mu: int = 32
    mu_sites: str = "both"
    dtype: str = "float32"

    def __post_init__(self):
        if min(self.n_units, self.features, self.hidden, self.n_mu) < 1:
            raise DomainError("all model dimensions must be >= 1")
        if self.kernel % 2 != 1:
            raise DomainError("kernel length must be odd")
        if self.mu_sites not in MU_SITES:
            raise DomainError(f"mu_sites must be one of {MU_SITES}")
        if self.mu_sites in ("decoder", "both") and self.hidden != self.n_units:
            # The decoder-side injection adds an embedding row directly to
            # the binary matrix, whose channel count is n_units.
            raise DomainError("mu injection at the decoder requires hidden == n_units")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)


class ToyAutoencoder:
    """Parameter container plus the forward pass.

    Parameters live in a fixed, documented order (see ``named_parameters``);
    the checkpoint format and the optimizer both rely on it.  Batch-norm
    running statistics are state, not parameters: they are updated in
    training mode and frozen in evaluation mode.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        dt = cfg.np_dtype
        rng = np.random.default_rng(seed)

        def uniform(fan_in: int, *shape) -> Tensor:
            bound = 1.0 / math.sqrt(fan_in)
            return Tensor(rng.uniform(-bound, bound, size=shape).astype(dt), requires_grad=True)

        n, f, h, k = cfg.n_units, cfg.features, cfg.hidden, cfg.kernel
        self.enc1_w = uniform(f * k, h, f, k)
        self.enc1_b = Tensor(np.zeros(h, dtype=dt), requires_grad=True)
        self.enc2_w = uniform(h * k, h, h, k)
        self.enc2_b = Tensor(np.zeros(h, dtype=dt), requires_grad=True)
        self.mix_in_wq = uniform(h, h, h)
        self.mix_in_wk = uniform(h, h, h)
        self.mix_in_wv = uniform(h, h, h)
        self.mix_in_wo = uniform(h, h, h)
        # No bias on the head: batch norm subtracts the per-unit mean right
        # after, so a bias would be an unidentifiable parameter.
        self.head_w = uniform(h, h, n)
        self.bn_gamma = Tensor(np.ones(n, dtype=dt), requires_grad=True)
        self.bn_beta = Tensor(np.zeros(n, dtype=dt), requires_grad=True)
        self.mix_out_wq = uniform(n, n, n)
        self.mix_out_wk = uniform(n, n, n)
        self.mix_out_wv = uniform(n, n, n)
        self.mix_out_wo = uniform(n, n, n)
        self.dec1_w = uniform(n * k, h, n, k)
        self.dec1_b = Tensor(np.zeros(h, dtype=dt), requires_grad=True)
        self.dec2_w = uniform(h * k, f, h, k)
        self.dec2_b = Tensor(np.zeros(f, dtype=dt), requires_grad=True)
        self.mu_emb = uniform(h, cfg.n_mu, h)

        self.bn_running_mean = np.zeros(n, dtype=dt)
        self.bn_running_var = np.ones(n, dtype=dt)

    PARAM_ORDER = (
        "enc1_w", "enc1_b", "enc2_w", "enc2_b",
        "mix_in_wq", "mix_in_wk", "mix_in_wv", "mix_in_wo",
        "head_w", "bn_gamma", "bn_beta",
        "mix_out_wq", "mix_out_wk", "mix_out_wv", "mix_out_wo",
        "dec1_w", "dec1_b", "dec2_w", "dec2_b",
        "mu_emb",
    )
    STATE_ORDER = ("bn_running_mean", "bn_running_var")

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(name, getattr(self, name)) for name in self.PARAM_ORDER]

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    # -- forward pieces -------------------------------------------------------

    @staticmethod
    def _attention(x: Tensor, wq: Tensor, wk: Tensor, wv: Tensor, wo: Tensor) -> Tensor:
        """Residual single-head self-attention over (batch, channels, t)."""
        width = x.shape[1]
        seq = x.swapaxes(1, 2)  # (batch, t, channels)
        q = seq @ wq
        k = seq @ wk
        v = seq @ wv
        att = (q @ k.swapaxes(1, 2)).scale(1.0 / math.sqrt(width)).softmax(axis=-1)
        out = (att @ v) @ wo
        return x + out.swapaxes(1, 2)

    def _mu_rows(self, mu: np.ndarray) -> Tensor:
        # (batch,) indices -> (batch, hidden, 1), broadcast over time.
        return self.mu_emb.take_rows(mu).reshape(len(mu), self.cfg.hidden, 1)

    def _check_mu(self, mu, batch: int) -> np.ndarray:
        arr = np.broadcast_to(np.asarray(mu, dtype=np.int64), (batch,)).copy()
        if arr.min() < 0 or arr.max() >= self.cfg.n_mu:
            raise DomainError(f"mu must lie in 0..{self.cfg.n_mu - 1}")
        return arr

    def encode_logits(self, x: Tensor, mu: np.ndarray | None, training: bool) -> Tensor:
        h = conv1d(x, self.enc1_w, self.enc1_b).tanh()
        h = conv1d(h, self.enc2_w, self.enc2_b).tanh()
        if mu is not None and self.cfg.mu_sites in ("encoder", "both"):
            h = h + self._mu_rows(mu)
        h = self._attention(h, self.mix_in_wq, self.mix_in_wk, self.mix_in_wv, self.mix_in_wo)
        logits = (h.swapaxes(1, 2) @ self.head_w).swapaxes(1, 2)
        return batch_norm(
            logits, self.bn_gamma, self.bn_beta,
            self.bn_running_mean, self.bn_running_var, training,
        )

    def decode_frames(self, z: Tensor, mu: np.ndarray | None) -> Tensor:
        u = z
        if mu is not None and self.cfg.mu_sites in ("decoder", "both"):
            u = u + self._mu_rows(mu)
        u = self._attention(u, self.mix_out_wq, self.mix_out_wk, self.mix_out_wv, self.mix_out_wo)
        u = conv1d(u, self.dec1_w, self.dec1_b).tanh()
        return conv1d(u, self.dec2_w, self.dec2_b)

    def forward(self, x_frames, mu=None, training: bool = False):
        """Run the full autoencoder.

        ``x_frames`` is (features, t) or (batch, features, t); ``mu`` is an
        integer in 0..31, one per batch element or a single value for all.
        Returns ``(z, x_hat, logits)`` with the batch axis mirroring the
        input.  Evaluation mode (the default) uses the frozen running
        batch-norm statistics and is a pure function of its arguments.
        """
        x = x_frames if isinstance(x_frames, Tensor) else Tensor(np.asarray(x_frames, dtype=self.cfg.np_dtype))
        squeeze = x.data.ndim == 2
        if squeeze:
            x = x.reshape(1, *x.data.shape)
        if x.data.ndim != 3 or x.data.shape[1] != self.cfg.features:
            raise ShapeError(f"expected (batch, {self.cfg.features}, t) frames, got {x.data.shape}")
        mu_arr = None if mu is None else self._check_mu(mu, x.data.shape[0])
        logits = self.encode_logits(x, mu_arr, training)
        z = logits.heaviside()
        x_hat = self.decode_frames(z, mu_arr)
        if squeeze:
            t = x.data.shape[2]
            return (
                z.reshape(self.cfg.n_units, t),
                x_hat.reshape(self.cfg.features, t),
                logits.reshape(self.cfg.n_units, t),
            )
        return z, x_hat, logits


def encode_to_matrix(model: ToyAutoencoder, x_frames, mu=None) -> EventMatrix:
    """Evaluation-mode encode of one (features, t) sample to an EventMatrix."""
    frames = np.asarray(x_frames)
    if frames.ndim != 2:
        raise ShapeError(f"expected a single (features, t) sample, got shape {frames.shape}")
    z, _, _ = model.forward(frames, mu=mu, training=False)
    return EventMatrix.from_dense(z.data.astype(np.uint8))
