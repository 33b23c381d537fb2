"""Canonical in-memory model of a binary N x T event matrix.

Events are the coordinates of the 1-entries. Internally they are kept as a
pair of integer arrays sorted in canonical order (unit ascending, then step
ascending), which every serialization format relies on. Instances are
immutable after construction.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ShapeError

MAX_SIDE = 2**32  # unit/step indices must fit comfortably in 64-bit fields


class EventMatrix:
    """Binary event matrix stored as sorted (unit, step) coordinate arrays."""

    __slots__ = ("n_units", "n_steps", "_units", "_steps")

    def __init__(self, n_units: int, n_steps: int, events: Iterable[tuple[int, int]] = ()):
        if not (1 <= n_units < MAX_SIDE and 1 <= n_steps < MAX_SIDE):
            raise DomainError(f"matrix shape {n_units}x{n_steps} out of range")
        self.n_units = int(n_units)
        self.n_steps = int(n_steps)
        pairs = np.asarray(sorted(set((int(i), int(t)) for i, t in events)), dtype=np.int64)
        if pairs.size == 0:
            pairs = pairs.reshape(0, 2)
        self._units = pairs[:, 0].copy()
        self._steps = pairs[:, 1].copy()
        self._validate()

    @classmethod
    def _from_sorted_arrays(cls, n_units: int, n_steps: int,
                            units: np.ndarray, steps: np.ndarray) -> "EventMatrix":
        """Trusted constructor: arrays must already be canonical and in range."""
        m = object.__new__(cls)
        m.n_units = int(n_units)
        m.n_steps = int(n_steps)
        m._units = np.asarray(units, dtype=np.int64)
        m._steps = np.asarray(steps, dtype=np.int64)
        m._units.flags.writeable = False
        m._steps.flags.writeable = False
        return m

    def _validate(self) -> None:
        if self._units.size:
            if self._units.min() < 0 or self._units.max() >= self.n_units:
                raise DomainError("unit index out of range")
            if self._steps.min() < 0 or self._steps.max() >= self.n_steps:
                raise DomainError("step index out of range")
        self._units.flags.writeable = False
        self._steps.flags.writeable = False

    # -- accessors ---------------------------------------------------------

    @property
    def units(self) -> np.ndarray:
        """Unit indices in canonical order."""
        return self._units

    @property
    def steps(self) -> np.ndarray:
        """Step indices in canonical order (paired with `units`)."""
        return self._steps

    @property
    def event_count(self) -> int:
        return int(self._units.size)

    @property
    def density(self) -> float:
        return self.event_count / (self.n_units * self.n_steps)

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self._units.tolist(), self._steps.tolist()))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EventMatrix)
            and self.n_units == other.n_units
            and self.n_steps == other.n_steps
            and np.array_equal(self._units, other._units)
            and np.array_equal(self._steps, other._steps)
        )

    def __repr__(self) -> str:
        return f"EventMatrix({self.n_units}x{self.n_steps}, S={self.event_count})"

    # -- conversions -------------------------------------------------------

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence[int]] | np.ndarray) -> "EventMatrix":
        """Build from N rows of T 0/1 entries; rows must be rectangular."""
        if not isinstance(rows, np.ndarray):
            lengths = {len(r) for r in rows}
            if len(lengths) > 1:
                raise ShapeError(f"ragged rows: lengths {sorted(lengths)}")
        dense = np.asarray(rows)
        if dense.ndim != 2:
            raise ShapeError(f"expected a 2-D array, got shape {dense.shape}")
        units, steps = np.nonzero(dense)
        return cls._from_sorted_arrays(dense.shape[0], dense.shape[1],
                                       units.astype(np.int64), steps.astype(np.int64))

    def to_dense(self) -> np.ndarray:
        """Dense uint8 image; from_dense(to_dense(m)) == m."""
        dense = np.zeros((self.n_units, self.n_steps), dtype=np.uint8)
        dense[self._units, self._steps] = 1
        return dense


def event_count(m: EventMatrix) -> int:
    """Number of events S."""
    return m.event_count


def random_matrix(seed: int, n_units: int, n_steps: int, s: int) -> EventMatrix:
    """Uniformly random matrix with exactly `s` distinct events, seed-deterministic."""
    cells = n_units * n_steps
    if not 0 <= s <= cells:
        raise DomainError(f"event count {s} exceeds {n_units}x{n_steps} cells")
    rng = np.random.default_rng(seed)
    flat = rng.choice(cells, size=s, replace=False)
    flat.sort()
    return EventMatrix._from_sorted_arrays(
        n_units, n_steps, flat // n_steps, flat % n_steps
    )


def save_text(m: EventMatrix) -> str:
    """Text interchange form: 'N T' header line, then one 'i t' line per event."""
    lines = [f"{m.n_units} {m.n_steps}"]
    lines.extend(f"{i} {t}" for i, t in zip(m.units.tolist(), m.steps.tolist()))
    return "\n".join(lines) + "\n"


def load_text(text: str) -> EventMatrix:
    """Inverse of save_text."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ShapeError("empty event matrix text")
    try:
        n_units, n_steps = map(int, lines[0].split())
        events = [tuple(map(int, ln.split())) for ln in lines[1:]]
        if any(len(e) != 2 for e in events):
            raise ValueError("expected 'i t' pairs")
    except ValueError as exc:
        raise ShapeError(f"malformed event matrix text: {exc}") from exc
    return EventMatrix(n_units, n_steps, events)
