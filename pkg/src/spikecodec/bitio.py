"""Bit-granular writer/reader with a deterministic MSB-first layout.

Layout rules:
- Fields are appended most-significant bit first, with no alignment padding
  between fields.
- Bit k of the stream lives in byte k // 8 at in-byte position 7 - (k % 8).
- Unused trailing bits of the final byte are always zero.
- A single field is at most 64 bits wide.

Both scalar (`write_bits`/`read_bits`) and vectorized array paths are
provided; the array paths produce byte-identical streams and exist so that
encoding large matrices is not a per-bit Python loop.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, TruncatedStreamError

MAX_FIELD_WIDTH = 64


def _check_width(width: int) -> None:
    if not 0 <= width <= MAX_FIELD_WIDTH:
        raise DomainError(f"field width {width} outside 0..{MAX_FIELD_WIDTH}")


class BitBuffer:
    """Growable bit stream builder."""

    __slots__ = ("_payload", "length_bits")

    def __init__(self):
        self._payload = bytearray()
        self.length_bits = 0

    def __len__(self) -> int:
        return self.length_bits

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitBuffer)
            and self.length_bits == other.length_bits
            and self._payload == other._payload
        )

    def to_bytes(self) -> bytes:
        """Byte image of the stream; trailing bits of the last byte are zero."""
        return bytes(self._payload)

    def write_bits(self, value: int, width: int) -> "BitBuffer":
        """Append `value` as a `width`-bit big-endian field. width=0 is a no-op."""
        _check_width(width)
        if width == 0:
            return self
        value = int(value)
        if value < 0 or value >> width:
            raise DomainError(f"value {value} does not fit in {width} bits")
        used = self.length_bits & 7
        if used:
            free = 8 - used
            take = min(free, width)
            chunk = value >> (width - take)
            self._payload[-1] |= chunk << (free - take)
            width -= take
            value &= (1 << width) - 1
            self.length_bits += take
        while width >= 8:
            width -= 8
            self._payload.append((value >> width) & 0xFF)
            self.length_bits += 8
        if width:
            self._payload.append((value << (8 - width)) & 0xFF)
            self.length_bits += width
        return self

    def write_bit_array(self, bits: np.ndarray) -> "BitBuffer":
        """Append a 0/1 array, one bit per element, in order."""
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size == 0:
            return self
        used = self.length_bits & 7
        if used:
            bits = np.concatenate([np.zeros(used, dtype=np.uint8), bits])
        packed = np.packbits(bits)
        if used:
            self._payload[-1] |= int(packed[0])
            self._payload.extend(packed[1:].tobytes())
        else:
            self._payload.extend(packed.tobytes())
        self.length_bits += bits.size - used
        return self

    def write_uint_array(self, values: np.ndarray, width: int) -> "BitBuffer":
        """Append each value as a `width`-bit field, equivalent to repeated write_bits."""
        _check_width(width)
        values = np.asarray(values, dtype=np.uint64).ravel()
        if width == 0:
            if np.any(values):
                raise DomainError("nonzero value in zero-width field")
            return self
        if values.size == 0:
            return self
        if width < 64 and np.any(values >> np.uint64(width)):
            raise DomainError(f"value does not fit in {width} bits")
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
        bits = ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
        return self.write_bit_array(bits)


class BitCursor:
    """Read-only cursor over a byte sequence, consuming MSB-first fields."""

    __slots__ = ("_source", "_arr", "position_bits")

    def __init__(self, source: bytes, position_bits: int = 0):
        self._source = bytes(source)
        self._arr = np.frombuffer(self._source, dtype=np.uint8)
        if not 0 <= position_bits <= 8 * len(self._source):
            raise DomainError("cursor position outside source")
        self.position_bits = position_bits

    @property
    def remaining_bits(self) -> int:
        return 8 * len(self._source) - self.position_bits

    def _require(self, count: int) -> None:
        if count > self.remaining_bits:
            raise TruncatedStreamError(
                f"need {count} bits at position {self.position_bits}, "
                f"have {self.remaining_bits}"
            )

    def read_bits(self, width: int) -> int:
        """Consume a `width`-bit field and return its value. width=0 reads nothing."""
        _check_width(width)
        if width == 0:
            return 0
        self._require(width)
        value = 0
        pos = self.position_bits
        left = width
        while left > 0:
            byte = self._source[pos >> 3]
            offset = pos & 7
            avail = 8 - offset
            take = min(avail, left)
            chunk = (byte >> (avail - take)) & ((1 << take) - 1)
            value = (value << take) | chunk
            pos += take
            left -= take
        self.position_bits = pos
        return value

    def read_bit_array(self, count: int) -> np.ndarray:
        """Consume `count` single bits as a uint8 0/1 array."""
        if count < 0:
            raise DomainError("negative bit count")
        self._require(count)
        if count == 0:
            return np.zeros(0, dtype=np.uint8)
        start = self.position_bits >> 3
        stop = (self.position_bits + count + 7) >> 3
        bits = np.unpackbits(self._arr[start:stop])
        offset = self.position_bits & 7
        self.position_bits += count
        return bits[offset : offset + count]

    def read_uint_array(self, count: int, width: int) -> np.ndarray:
        """Consume `count` fields of `width` bits each; returns uint64 values."""
        _check_width(width)
        if count < 0:
            raise DomainError("negative field count")
        if width == 0 or count == 0:
            self._require(count * width)
            return np.zeros(count, dtype=np.uint64)
        bits = self.read_bit_array(count * width).reshape(count, width)
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
        return (bits.astype(np.uint64) << shifts[None, :]).sum(axis=1, dtype=np.uint64)
