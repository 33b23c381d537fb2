"""Bit-exact storage of event matrices in four formats plus a container.

Formats and payload layouts (all fields MSB-first, no padding):

- Dense: N*T single bits, unit-major (row i, column t at bit i*T + t).
- Coo: S records of (unit, step), unit in width(N) bits, step in width(T)
  bits, in canonical (unit, step) order.
- CompressedTime: the S step indices grouped by unit ascending (steps
  ascending within each unit), width(T) bits each; then N-1 offset entries
  of width(S+1) bits holding the cumulative event count after units
  1..N-1. The leading 0 and trailing S of the full offset list are implied.
- CompressedUnits: the mirror image: S unit indices grouped by step
  (width(N) bits each), then T-1 cumulative offsets of width(S+1) bits.

width(D) is the number of bits needed to index D distinct values: 0 for
D <= 1, else ceil(log2 D). Offsets range over 0..S, hence width(S+1); the
`paper` cost mode instead charges ceil(log2 S) per offset entry, which
under-counts by one bit per entry whenever S is a power of two >= 2. The
encoder always emits exact-mode payloads.

The `.spkm` container: a byte-aligned big-endian header (magic "SPKM",
version u8, n_units u32, n_steps u32, s_max u32, sample_count u32), then
per sample a 2-bit format tag, the event count S in width(s_max+1) bits
(omitted for Dense, whose payload length is shape-implied), and the
payload. The final byte is zero-padded.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bitio import BitBuffer, BitCursor
from .errors import CorruptStreamError, DomainError, ShapeError, TruncatedStreamError
from .event_matrix import EventMatrix

MAGIC = b"SPKM"
VERSION = 1
_HEADER = struct.Struct(">4sBIIII")


class StorageFormat(enum.IntEnum):
    DENSE = 0b00
    COO = 0b01
    COMPRESSED_TIME = 0b10
    COMPRESSED_UNITS = 0b11

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    StorageFormat.DENSE: "dense",
    StorageFormat.COO: "coo",
    StorageFormat.COMPRESSED_TIME: "time",
    StorageFormat.COMPRESSED_UNITS: "units",
}


def width(domain: int) -> int:
    """Bits needed to index `domain` distinct values; 0 when domain <= 1."""
    if domain < 0:
        raise DomainError("negative domain")
    return (domain - 1).bit_length() if domain > 1 else 0


def _log2ceil(s: int) -> int:
    """ceil(log2 s) with the convention 0 for s <= 1 (paper-mode offsets)."""
    return (s - 1).bit_length() if s > 1 else 0


# -- cost functions ---------------------------------------------------------


def cost_dense(n: int, t: int) -> int:
    if n < 1 or t < 1:
        raise DomainError("matrix sides must be >= 1")
    return n * t


def cost_coo(n: int, t: int, s: int) -> int:
    _check_nts(n, t, s)
    return s * (width(n) + width(t))


def cost_time(n: int, t: int, s: int, mode: str = "exact") -> int:
    """Compressed-time cost; `mode` is 'exact' (emitted bits) or 'paper'."""
    _check_nts(n, t, s)
    per_offset = _offset_width(s, mode)
    return s * width(t) + (n - 1) * per_offset


def cost_units(n: int, t: int, s: int, mode: str = "exact") -> int:
    """Compressed-units cost; symmetric to cost_time with N and T swapped."""
    _check_nts(n, t, s)
    per_offset = _offset_width(s, mode)
    return s * width(n) + (t - 1) * per_offset


def _offset_width(s: int, mode: str) -> int:
    if mode == "exact":
        return width(s + 1)
    if mode == "paper":
        return _log2ceil(s)
    raise DomainError(f"unknown cost mode {mode!r}")


def _check_nts(n: int, t: int, s: int) -> None:
    if n < 1 or t < 1:
        raise DomainError("matrix sides must be >= 1")
    if not 0 <= s <= n * t:
        raise DomainError(f"event count {s} outside 0..{n * t}")


@dataclass(frozen=True)
class CostReport:
    n: int
    t: int
    s: int
    bits_dense: int
    bits_coo: int
    bits_time: int
    bits_units: int
    best: StorageFormat

    CSV_HEADER = "N,T,S,bits_dense,bits_coo,bits_time,bits_units,best"

    def bits(self, f: StorageFormat) -> int:
        return (self.bits_dense, self.bits_coo, self.bits_time, self.bits_units)[f]

    def csv_row(self) -> str:
        return (
            f"{self.n},{self.t},{self.s},{self.bits_dense},{self.bits_coo},"
            f"{self.bits_time},{self.bits_units},{self.best.short_name}"
        )


def cost_report(n: int, t: int, s: int) -> CostReport:
    """All four exact-mode costs and the arg-min format (ties: lowest tag)."""
    costs = (
        cost_dense(n, t),
        cost_coo(n, t, s),
        cost_time(n, t, s),
        cost_units(n, t, s),
    )
    best = StorageFormat(min(range(4), key=lambda i: (costs[i], i)))
    return CostReport(n, t, s, *costs, best)


# -- per-matrix encode/decode ------------------------------------------------


def encode(m: EventMatrix, f: StorageFormat, buf: BitBuffer | None = None) -> BitBuffer:
    """Append the payload for `m` in format `f`; returns the buffer.

    The payload length always equals the exact-mode cost function for `f`.
    """
    if buf is None:
        buf = BitBuffer()
    n, t, s = m.n_units, m.n_steps, m.event_count
    if f == StorageFormat.DENSE:
        buf.write_bit_array(m.to_dense().ravel())
    elif f == StorageFormat.COO:
        w_n, w_t = width(n), width(t)
        records = (m.units.astype(np.uint64) << np.uint64(w_t)) | m.steps.astype(np.uint64)
        buf.write_uint_array(records, w_n + w_t)
    elif f == StorageFormat.COMPRESSED_TIME:
        buf.write_uint_array(m.steps, width(t))
        offsets = np.searchsorted(m.units, np.arange(1, n))
        buf.write_uint_array(offsets, width(s + 1))
    elif f == StorageFormat.COMPRESSED_UNITS:
        order = np.lexsort((m.units, m.steps))
        steps_sorted = m.steps[order]
        buf.write_uint_array(m.units[order], width(n))
        offsets = np.searchsorted(steps_sorted, np.arange(1, t))
        buf.write_uint_array(offsets, width(s + 1))
    else:
        raise DomainError(f"unknown format {f!r}")
    return buf


def payload_bits(n: int, t: int, s: int, f: StorageFormat) -> int:
    """Exact payload length emitted by encode() for the given shape/count."""
    if f == StorageFormat.DENSE:
        return cost_dense(n, t)
    if f == StorageFormat.COO:
        return cost_coo(n, t, s)
    if f == StorageFormat.COMPRESSED_TIME:
        return cost_time(n, t, s)
    if f == StorageFormat.COMPRESSED_UNITS:
        return cost_units(n, t, s)
    raise DomainError(f"unknown format {f!r}")


def decode(cur: BitCursor, n: int, t: int, s: int, f: StorageFormat) -> EventMatrix:
    """Consume one payload and rebuild the matrix; inverse of encode()."""
    _check_nts(n, t, s)
    try:
        if f == StorageFormat.DENSE:
            bits = cur.read_bit_array(n * t)
            flat = np.nonzero(bits)[0]
            if flat.size != s:
                raise CorruptStreamError(
                    f"dense payload has {flat.size} events, expected {s}"
                )
            units, steps = flat // t, flat % t
        elif f == StorageFormat.COO:
            w_n, w_t = width(n), width(t)
            records = cur.read_uint_array(s, w_n + w_t)
            units = (records >> np.uint64(w_t)).astype(np.int64)
            steps = (records & np.uint64((1 << w_t) - 1)).astype(np.int64)
            _check_indices(units, n, "unit")
            _check_indices(steps, t, "step")
            keys = units * t + steps
            if np.any(np.diff(keys) <= 0):
                raise CorruptStreamError("coo records not strictly ascending")
        elif f == StorageFormat.COMPRESSED_TIME:
            steps = cur.read_uint_array(s, width(t)).astype(np.int64)
            offsets = cur.read_uint_array(n - 1, width(s + 1)).astype(np.int64)
            units = _expand_groups(offsets, s, n, steps, t, "step")
        elif f == StorageFormat.COMPRESSED_UNITS:
            units_by_step = cur.read_uint_array(s, width(n)).astype(np.int64)
            offsets = cur.read_uint_array(t - 1, width(s + 1)).astype(np.int64)
            step_of = _expand_groups(offsets, s, t, units_by_step, n, "unit")
            order = np.lexsort((step_of, units_by_step))
            units, steps = units_by_step[order], step_of[order]
        else:
            raise DomainError(f"unknown format {f!r}")
    except TruncatedStreamError as exc:
        raise CorruptStreamError(f"truncated payload: {exc}") from exc
    return EventMatrix._from_sorted_arrays(n, t, np.ascontiguousarray(units),
                                           np.ascontiguousarray(steps))


def _check_indices(idx: np.ndarray, bound: int, what: str) -> None:
    if idx.size and int(idx.max()) >= bound:
        raise CorruptStreamError(f"{what} index {int(idx.max())} >= {bound}")


def _expand_groups(offsets: np.ndarray, s: int, groups: int,
                   members: np.ndarray, member_bound: int, member_name: str) -> np.ndarray:
    """Group ids per member from cumulative offsets; validates monotonicity."""
    bounds = np.concatenate([[0], offsets, [s]])
    if np.any(np.diff(bounds) < 0) or (offsets.size and int(offsets.max()) > s):
        raise CorruptStreamError("offsets not monotone within 0..S")
    group_of = np.repeat(np.arange(groups, dtype=np.int64), np.diff(bounds))
    _check_indices(members, member_bound, member_name)
    # members must be strictly ascending within each group (canonical order,
    # and the only way the payload can represent distinct events)
    if s > 1:
        same_group = group_of[1:] == group_of[:-1]
        if np.any(same_group & (np.diff(members) <= 0)):
            raise CorruptStreamError(f"{member_name} indices not ascending within group")
    return group_of


# -- multi-sample container --------------------------------------------------


@dataclass(frozen=True)
class StreamHeader:
    n_units: int
    n_steps: int
    s_max: int
    sample_count: int
    version: int = VERSION

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, self.version, self.n_units, self.n_steps,
                            self.s_max, self.sample_count)

    @classmethod
    def from_bytes(cls, data: bytes) -> "StreamHeader":
        if len(data) < _HEADER.size:
            raise TruncatedStreamError("stream shorter than header")
        magic, version, n, t, s_max, count = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CorruptStreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported version {version}")
        if n < 1 or t < 1 or s_max > n * t:
            raise CorruptStreamError("inconsistent header shape")
        return cls(n, t, s_max, count, version)


def pack_stream(samples: Sequence[EventMatrix],
                choose: StorageFormat | str = "auto") -> bytes:
    """Serialize samples sharing one (N, T) shape into a `.spkm` byte image.

    choose='auto' picks each sample's arg-min exact-cost format; passing a
    StorageFormat forces that format for every sample.
    """
    samples = list(samples)
    shapes = {(m.n_units, m.n_steps) for m in samples}
    if len(shapes) > 1:
        raise ShapeError(f"mixed sample shapes {sorted(shapes)}")
    if samples:
        n, t = samples[0].n_units, samples[0].n_steps
        s_max = max(m.event_count for m in samples)
    else:
        n, t, s_max = 1, 1, 0
    header = StreamHeader(n, t, s_max, len(samples))
    out = io.BytesIO()
    out.write(header.to_bytes())
    buf = BitBuffer()
    w_s = width(s_max + 1)
    for m in samples:
        if choose == "auto":
            f = cost_report(n, t, m.event_count).best
        else:
            f = StorageFormat(choose)
        buf.write_bits(int(f), 2)
        if f != StorageFormat.DENSE:
            buf.write_bits(m.event_count, w_s)
        encode(m, f, buf)
    out.write(buf.to_bytes())
    return out.getvalue()


def unpack_stream(data: bytes) -> list[EventMatrix]:
    """Exact inverse of pack_stream."""
    header = StreamHeader.from_bytes(data)
    cur = BitCursor(data, position_bits=8 * _HEADER.size)
    n, t = header.n_units, header.n_steps
    w_s = width(header.s_max + 1)
    samples = []
    for k in range(header.sample_count):
        try:
            f = StorageFormat(cur.read_bits(2))
            if f == StorageFormat.DENSE:
                s = -1  # determined by the payload itself
            else:
                s = cur.read_bits(w_s)
                if s > header.s_max:
                    raise CorruptStreamError(
                        f"sample {k}: S={s} exceeds header s_max={header.s_max}"
                    )
        except TruncatedStreamError as exc:
            raise CorruptStreamError(f"sample {k}: truncated: {exc}") from exc
        try:
            if f == StorageFormat.DENSE:
                bits = cur.read_bit_array(n * t)
                flat = np.nonzero(bits)[0]
                m = EventMatrix._from_sorted_arrays(n, t, flat // t, flat % t)
            else:
                m = decode(cur, n, t, s, f)
        except TruncatedStreamError as exc:
            raise CorruptStreamError(f"sample {k}: truncated: {exc}") from exc
        except CorruptStreamError as exc:
            raise CorruptStreamError(f"sample {k}: {exc}") from exc
        samples.append(m)
    return samples


def reports_to_csv(reports: Iterable[CostReport]) -> str:
    """CSV emission of cost reports, one row per report."""
    lines = [CostReport.CSV_HEADER]
    lines.extend(r.csv_row() for r in reports)
    return "\n".join(lines) + "\n"
