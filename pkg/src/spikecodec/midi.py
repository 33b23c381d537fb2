"""Minimal Standard MIDI File reader producing note lists and onset grids.

Supports format 0 and format 1 files with tick-per-quarter timing.  Only
note-on, note-off, and tempo meta events are interpreted; every other
channel, meta, or sysex event is decoded far enough to skip it losslessly.
All parse failures raise MidiParseError carrying the absolute byte offset
of the offending data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import DomainError, MidiParseError
from .synthdata import NoteGrid

DEFAULT_US_PER_QUARTER = 500000


@dataclass(frozen=True)
class MidiNote:
    pitch: int
    onset_s: float
    release_s: float
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise DomainError(f"pitch {self.pitch} outside 0..127")
        if not 1 <= self.velocity <= 127:
            raise DomainError(f"velocity {self.velocity} outside 1..127")
        if self.onset_s > self.release_s:
            raise DomainError("note releases before its onset")


class TempoMap:
    """Piecewise-constant tempo over absolute ticks.

    Entries are (tick, microseconds per quarter note), strictly increasing
    in tick; before the first entry the SMF default of 500000 us applies.
    """

    def __init__(self, ticks_per_quarter: int, changes: list[tuple[int, int]] | None = None):
        if ticks_per_quarter < 1:
            raise DomainError("ticks_per_quarter must be >= 1")
        self.ticks_per_quarter = ticks_per_quarter
        entries = [(0, DEFAULT_US_PER_QUARTER)]
        for tick, us in sorted(changes or [], key=lambda c: c[0]):
            if us < 1:
                raise DomainError("tempo must be >= 1 us per quarter")
            if tick == entries[-1][0]:
                entries[-1] = (tick, us)  # same-tick changes: last one wins
            else:
                entries.append((tick, us))
        self.entries = entries

    def seconds(self, tick: int) -> float:
        """Convert an absolute tick to seconds by integrating the segments."""
        if tick < 0:
            raise DomainError("tick must be >= 0")
        total_us = 0.0
        for (start, us), nxt in zip(self.entries, self.entries[1:] + [(None, None)]):
            if nxt[0] is None or tick <= nxt[0]:
                total_us += (tick - start) * us
                break
            total_us += (nxt[0] - start) * us
        return total_us / self.ticks_per_quarter / 1e6


class _Reader:
    def __init__(self, data: bytes, base: int):
        self.data = data
        self.pos = 0
        self.base = base  # absolute offset of data[0] in the file

    @property
    def offset(self) -> int:
        return self.base + self.pos

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int, what: str) -> bytes:
        if self.remaining() < n:
            raise MidiParseError(f"truncated {what}", self.offset)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def byte(self, what: str) -> int:
        return self.take(1, what)[0]

    def varint(self) -> int:
        value, consumed = read_varint(self.data, self.pos, self.base)
        self.pos += consumed
        return value


def read_varint(data: bytes, pos: int = 0, base: int = 0) -> tuple[int, int]:
    """Decode a variable-length quantity (7 bits per byte, high bit
    continues, at most 4 bytes); returns (value, bytes consumed)."""
    value = 0
    for i in range(4):
        if pos + i >= len(data):
            raise MidiParseError("truncated variable-length quantity", base + len(data))
        b = data[pos + i]
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, i + 1
    raise MidiParseError("variable-length quantity longer than 4 bytes", base + pos + 3)


# track events: (abs_tick, order, kind, channel, a, b) with kind in
# {"on", "off", "tempo"}; ``order`` preserves in-file order for stable merge.


def _parse_track(reader: _Reader, track_index: int) -> list[tuple]:
    events = []
    tick = 0
    order = 0
    running_status = None
    while True:
        if reader.remaining() == 0:
            raise MidiParseError("track ended without end-of-track meta event", reader.offset)
        tick += reader.varint()
        status_offset = reader.offset
        first = reader.byte("event status")
        if first >= 0x80:
            status = first
        else:
            if running_status is None:
                raise MidiParseError(f"data byte 0x{first:02x} with no running status", status_offset)
            status = running_status
            reader.pos -= 1

        if status == 0xFF:
            running_status = None
            meta_type = reader.byte("meta type")
            length = reader.varint()
            payload = reader.take(length, "meta payload")
            if meta_type == 0x2F:
                if reader.remaining() != 0:
                    raise MidiParseError(f"{reader.remaining()} bytes after end-of-track", reader.offset)
                return events
            if meta_type == 0x51:
                if length != 3:
                    raise MidiParseError(f"tempo meta of length {length}, expected 3", status_offset)
                us = int.from_bytes(payload, "big")
                events.append((tick, (track_index, order), "tempo", 0, us, 0))
        elif status in (0xF0, 0xF7):
            running_status = None
            length = reader.varint()
            reader.take(length, "sysex payload")
        elif status >= 0xF0:
            raise MidiParseError(f"unsupported system message 0x{status:02x}", status_offset)
        else:
            running_status = status
            kind_hi = status & 0xF0
            channel = status & 0x0F
            n_data = 1 if kind_hi in (0xC0, 0xD0) else 2
            data_offset = reader.offset
            data = reader.take(n_data, "event data")
            if any(b >= 0x80 for b in data):
                raise MidiParseError("data byte with high bit set", data_offset)
            if kind_hi == 0x90 and data[1] > 0:
                events.append((tick, (track_index, order), "on", channel, data[0], data[1]))
            elif kind_hi == 0x80 or (kind_hi == 0x90 and data[1] == 0):
                events.append((tick, (track_index, order), "off", channel, data[0], data[1]))
            # other channel messages carry no note information
        order += 1


def parse_smf(data: bytes) -> list[MidiNote]:
    """Parse an SMF format 0/1 byte string into a time-sorted note list.

    Notes are paired first-on/first-off per (channel, pitch); a note-on with
    velocity 0 closes like a note-off.  Unclosed notes at end of file are
    dropped.  Tick times become seconds through the merged tempo map.
    """
    if len(data) < 14:
        raise MidiParseError("file shorter than an SMF header", 0)
    if data[:4] != b"MThd":
        raise MidiParseError(f"bad header magic {data[:4]!r}", 0)
    header_len = int.from_bytes(data[4:8], "big")
    if header_len < 6 or len(data) < 8 + header_len:
        raise MidiParseError("truncated MThd chunk", 4)
    fmt, n_tracks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("zero ticks per quarter", 12)
    if fmt == 0 and n_tracks != 1:
        raise MidiParseError(f"format 0 declares {n_tracks} tracks", 10)

    pos = 8 + header_len
    merged: list[tuple] = []
    tracks_seen = 0
    while tracks_seen < n_tracks:
        if len(data) - pos < 8:
            raise MidiParseError(f"expected {n_tracks} tracks, found {tracks_seen}", pos)
        chunk_type = data[pos : pos + 4]
        chunk_len = int.from_bytes(data[pos + 4 : pos + 8], "big")
        body_start = pos + 8
        if body_start + chunk_len > len(data):
            raise MidiParseError(f"chunk length {chunk_len} overruns the file", pos + 4)
        if chunk_type == b"MTrk":
            reader = _Reader(data[body_start : body_start + chunk_len], body_start)
            merged.extend(_parse_track(reader, tracks_seen))
            tracks_seen += 1
        # unknown chunk types are skipped whole, per the SMF spec
        pos = body_start + chunk_len

    merged.sort(key=lambda e: (e[0], e[1]))
    tempo_changes = [(tick, a) for tick, _, kind, _, a, _ in merged if kind == "tempo"]
    tempo = TempoMap(division, tempo_changes)

    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    notes: list[MidiNote] = []
    for tick, _, kind, channel, pitch, velocity in merged:
        if kind == "on":
            open_notes.setdefault((channel, pitch), []).append((tick, velocity))
        elif kind == "off":
            queue = open_notes.get((channel, pitch))
            if queue:
                on_tick, on_velocity = queue.pop(0)
                notes.append(MidiNote(
                    pitch=pitch,
                    onset_s=tempo.seconds(on_tick),
                    release_s=tempo.seconds(tick),
                    velocity=on_velocity,
                ))
    notes.sort(key=lambda n: (n.onset_s, n.pitch))
    return notes


def onsets_to_grid(
    notes: list[MidiNote],
    dt: float,
    n_steps: int,
    pitch_range: tuple[int, int],
) -> NoteGrid:
    """Quantize note onsets to a binary (pitch, step) grid.

    ``pitch_range`` is inclusive (low, high); notes outside it, or whose
    onset bin falls at or beyond n_steps, are dropped.  Multiple onsets in
    one cell collapse to a single event.
    """
    if dt <= 0:
        raise DomainError("dt must be > 0")
    low, high = pitch_range
    if low > high:
        raise DomainError(f"empty pitch range {pitch_range}")
    cells = set()
    for note in notes:
        if not low <= note.pitch <= high:
            continue
        step = int(note.onset_s / dt)
        if step < n_steps:
            cells.add((note.pitch - low, step))
    return NoteGrid(high - low + 1, n_steps, sorted(cells))
