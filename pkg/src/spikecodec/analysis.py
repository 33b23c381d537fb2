"""Evaluation metrics: SI-SNR, event/onset cross-correlation, prominence.

Cross-correlation counts co-occurrences of binary unit events and note
onsets at integer lags; sums run over valid indices only (clips are causal,
there is no wraparound).  Counts are accumulated exactly (they are integer
sums well inside float64's exact range) and divided once by the number of
samples, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError
from .event_matrix import EventMatrix

EPSILON = 1e-12
SI_SNR_CAP_DB = 100.0


def si_snr(reference, estimate) -> float:
    """Scale-invariant signal-to-noise ratio in dB.

    Both signals are mean-centered; the estimate is decomposed into its
    projection onto the reference plus a residual.  Returns
    10*log10(|proj|^2 / (|residual|^2 + eps)), capped at +100 dB.
    """
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ShapeError(f"shape mismatch: {ref.shape} vs {est.shape}")
    ref = ref.reshape(-1) - ref.mean()
    est = est.reshape(-1) - est.mean()
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise DomainError("reference has zero energy after mean removal")
    target = (float(est @ ref) / ref_energy) * ref
    residual = est - target
    ratio = float(target @ target) / (float(residual @ residual) + EPSILON)
    return float(min(10.0 * np.log10(ratio + EPSILON), SI_SNR_CAP_DB))


@dataclass(frozen=True)
class CorrelationVolume:
    """C[i, alpha, tau] for units i, notes alpha, lags tau in -w..w."""

    values: np.ndarray  # (n_units, n_notes, 2w+1)
    w: int
    n_samples: int

    def at(self, unit: int, note: int, tau: int) -> float:
        if abs(tau) > self.w:
            raise DomainError(f"lag {tau} outside -{self.w}..{self.w}")
        return float(self.values[unit, note, tau + self.w])

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.w, self.w + 1)

    def to_csv(self) -> str:
        lines = ["i,alpha,tau,C"]
        n, k, _ = self.values.shape
        for i in range(n):
            for a in range(k):
                for j, tau in enumerate(range(-self.w, self.w + 1)):
                    lines.append(f"{i},{a},{tau},{self.values[i, a, j]:.10g}")
        return "\n".join(lines) + "\n"


def cross_correlation(
    z_samples: Sequence[EventMatrix],
    n_samples: Sequence[EventMatrix],
    w: int = 50,
) -> CorrelationVolume:
    """Average over paired samples of sum_t z[i, t] * n[alpha, t + tau].

    Indices t + tau outside 0..T-1 contribute nothing.  Pairs must agree on
    step count; all z must share a unit count and all n a note count.
    """
    if len(z_samples) != len(n_samples) or len(z_samples) == 0:
        raise ShapeError("need equal, nonzero numbers of event and onset samples")
    if w < 0:
        raise DomainError("lag window must be >= 0")
    n_units = z_samples[0].n_units
    n_notes = n_samples[0].n_units
    totals = np.zeros((n_units, n_notes, 2 * w + 1), dtype=np.float64)
    for z, n in zip(z_samples, n_samples):
        if z.n_steps != n.n_steps:
            raise ShapeError(f"paired samples disagree on steps: {z.n_steps} vs {n.n_steps}")
        if z.n_units != n_units or n.n_units != n_notes:
            raise ShapeError("inconsistent unit or note counts across samples")
        t = z.n_steps
        zd = z.to_dense().astype(np.float64)
        nd = n.to_dense().astype(np.float64)
        for j, tau in enumerate(range(-w, w + 1)):
            # sum_t z[:, t] n[:, t+tau] over t with both indices in range
            if tau >= 0:
                if tau < t:
                    totals[:, :, j] += zd[:, : t - tau] @ nd[:, tau:].T
            elif -tau < t:
                totals[:, :, j] += zd[:, -tau:] @ nd[:, : t + tau].T
    return CorrelationVolume(values=totals / len(z_samples), w=w, n_samples=len(z_samples))


@dataclass(frozen=True)
class ProminenceMatrix:
    """Signed zero-lag peak score per (unit, note) pair.

    phi = (mean C over |tau| < p  -  mean C over the baseline p <= |tau| <= w)
          / (std of C over the baseline + eps)

    A unit firing on a note's onsets scores high positive; one suppressed
    around onsets scores negative; flat correlation scores ~0.
    """

    phi: np.ndarray  # (n_units, n_notes)
    peak_window: int

    def dispersion(self) -> float:
        """Std of phi across all (unit, note) pairs."""
        return float(self.phi.std())

    def to_csv(self) -> str:
        lines = ["i,alpha,phi"]
        n, k = self.phi.shape
        for i in range(n):
            for a in range(k):
                lines.append(f"{i},{a},{self.phi[i, a]:.10g}")
        return "\n".join(lines) + "\n"


def peak_prominence(vol: CorrelationVolume, p: int = 10) -> ProminenceMatrix:
    """Baseline-referenced z-score of the short-lag correlation mass."""
    if not 1 <= p <= vol.w:
        raise DomainError(f"peak half-window {p} must lie in 1..{vol.w}")
    lags = np.abs(vol.lags)
    peak = lags < p
    base = lags >= p
    peak_mean = vol.values[:, :, peak].mean(axis=2)
    base_mean = vol.values[:, :, base].mean(axis=2)
    base_std = vol.values[:, :, base].std(axis=2)
    return ProminenceMatrix(phi=(peak_mean - base_mean) / (base_std + EPSILON), peak_window=p)


def anchor_units(prom: ProminenceMatrix, top_k: int) -> list[tuple[int, int]]:
    """Top units by their best note prominence: [(unit, anchor note), ...]
    sorted by that prominence, descending; ties break on unit index."""
    if top_k < 1:
        raise DomainError("top_k must be >= 1")
    anchors = prom.phi.argmax(axis=1)
    scores = prom.phi[np.arange(len(anchors)), anchors]
    order = sorted(range(len(anchors)), key=lambda i: (-scores[i], i))
    return [(i, int(anchors[i])) for i in order[:top_k]]


@dataclass(frozen=True)
class SelectivityTable:
    """Rows of the prominence matrix for the units most tuned to one note."""

    anchor_note: int
    units: list[int]
    rows: np.ndarray  # (top_k, n_notes), aligned with ``units``

    def to_csv(self) -> str:
        n_notes = self.rows.shape[1]
        lines = ["unit," + ",".join(f"phi_{a}" for a in range(n_notes))]
        for unit, row in zip(self.units, self.rows):
            lines.append(f"{unit}," + ",".join(f"{v:.10g}" for v in row))
        return "\n".join(lines) + "\n"


def selectivity_report(prom: ProminenceMatrix, top_k: int, anchor_note: int) -> SelectivityTable:
    """Units ranked by prominence against ``anchor_note``, best first."""
    n_units, n_notes = prom.phi.shape
    if not 0 <= anchor_note < n_notes:
        raise DomainError(f"anchor note {anchor_note} outside 0..{n_notes - 1}")
    if top_k < 1:
        raise DomainError("top_k must be >= 1")
    scores = prom.phi[:, anchor_note]
    order = sorted(range(n_units), key=lambda i: (-scores[i], i))[:top_k]
    return SelectivityTable(anchor_note=anchor_note, units=order, rows=prom.phi[order].copy())
