"""Analytic storage-cost comparisons: the VQ baseline and the regime sweep."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import CostReport, StorageFormat, width
from .errors import DomainError


@dataclass(frozen=True)
class VqConfig:
    """Vector-quantizer bottleneck: q codebooks of size k over t_z steps."""

    q: int
    k: int
    t_z: int

    def __post_init__(self):
        if self.q < 1 or self.k < 1 or self.t_z < 1:
            raise DomainError("VQ config fields must be >= 1")


def vq_cost(cfg: VqConfig) -> int:
    """Bits to store the dense integer code matrix: q * t_z * ceil(log2 k)."""
    return cfg.q * cfg.t_z * max(cfg.k - 1, 0).bit_length()


def bitrate(bits: float, duration_s: float) -> float:
    """Bits per second for a payload covering `duration_s` seconds."""
    if duration_s <= 0:
        raise DomainError("duration must be positive")
    return bits / duration_s


@dataclass(frozen=True)
class RegimeTable:
    """Per-S exact costs and best format at fixed (n, t), sorted by S."""

    n: int
    t: int
    rows: tuple[CostReport, ...]

    def boundaries(self) -> list[tuple[int, StorageFormat]]:
        """(S, format) at every S where the best format changes, plus the first row."""
        out = []
        prev = None
        for r in self.rows:
            if r.best != prev:
                out.append((r.s, r.best))
                prev = r.best
        return out

    def to_csv(self) -> str:
        lines = ["S,bits_dense,bits_coo,bits_time,bits_units,best"]
        lines.extend(
            f"{r.s},{r.bits_dense},{r.bits_coo},{r.bits_time},{r.bits_units},"
            f"{r.best.short_name}"
            for r in self.rows
        )
        return "\n".join(lines) + "\n"


def _width_arr(domain: np.ndarray) -> np.ndarray:
    """Vectorized width(): bits to index `domain` values, 0 when domain <= 1."""
    powers = np.concatenate([[0], 2 ** np.arange(0, 63, dtype=np.int64)])
    # width(D) = k where 2^(k-1) < D <= 2^k; searchsorted over [0,1,2,4,...]
    return (np.searchsorted(powers, domain, side="left") - 1).clip(0)


def sweep_costs(n: int, t: int, s_values: np.ndarray) -> np.ndarray:
    """Exact-mode costs for all four formats, shape (len(s_values), 4)."""
    s = np.asarray(s_values, dtype=np.int64)
    w_n, w_t = width(n), width(t)
    w_off = _width_arr(s + 1)
    dense = np.full_like(s, n * t)
    coo = s * (w_n + w_t)
    time_c = s * w_t + (n - 1) * w_off
    units_c = s * w_n + (t - 1) * w_off
    return np.stack([dense, coo, time_c, units_c], axis=1)


def regime_sweep(n: int, t: int, s_values: Sequence[int] | None = None) -> RegimeTable:
    """Cost table over S with the arg-min format per row (ties: lowest tag)."""
    if s_values is None:
        s_arr = np.arange(n * t + 1, dtype=np.int64)
    else:
        s_arr = np.asarray(sorted(set(int(s) for s in s_values)), dtype=np.int64)
        if s_arr.size and (s_arr[0] < 0 or s_arr[-1] > n * t):
            raise DomainError("S values outside 0..N*T")
    costs = sweep_costs(n, t, s_arr)
    best = np.argmin(costs, axis=1)  # argmin takes the first minimum: lowest tag
    rows = tuple(
        CostReport(n, t, int(s), *(int(c) for c in row), StorageFormat(int(b)))
        for s, row, b in zip(s_arr, costs, best)
    )
    return RegimeTable(n, t, rows)
