"""SMF parsing against a hand-crafted byte corpus.

Every file below is assembled byte by byte and its expected note list is
hand-computed from the tick and tempo math, so the parser is checked
against the file format definition rather than against itself.
"""

import numpy as np
import pytest

from spikecodec.errors import DomainError, MidiParseError
from spikecodec.midi import (
    DEFAULT_US_PER_QUARTER,
    MidiNote,
    TempoMap,
    onsets_to_grid,
    parse_smf,
    read_varint,
)


def vlq(value: int) -> bytes:
    """Encode a variable-length quantity (test-only writer half)."""
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def chunk(kind: bytes, body: bytes) -> bytes:
    return kind + len(body).to_bytes(4, "big") + body


def header(fmt: int, n_tracks: int, tpq: int) -> bytes:
    return chunk(b"MThd", fmt.to_bytes(2, "big") + n_tracks.to_bytes(2, "big") + tpq.to_bytes(2, "big"))


def track(*events: bytes) -> bytes:
    return chunk(b"MTrk", b"".join(events) + bytes([0x00, 0xFF, 0x2F, 0x00]))


def tempo_event(delta: int, us: int) -> bytes:
    return vlq(delta) + bytes([0xFF, 0x51, 0x03]) + us.to_bytes(3, "big")


def smf(fmt: int, tpq: int, *tracks: bytes) -> bytes:
    return header(fmt, len(tracks), tpq) + b"".join(tracks)


def write_smf(notes: list[MidiNote], tpq: int = 960) -> bytes:
    """Tiny test-only writer: format 0, default tempo, absolute rounding."""
    ticks_per_s = tpq * 1e6 / DEFAULT_US_PER_QUARTER
    timed = []
    for n in notes:
        timed.append((round(n.onset_s * ticks_per_s), 1, 0x90, n.pitch, n.velocity))
        timed.append((round(n.release_s * ticks_per_s), 0, 0x80, n.pitch, 0x40))
    timed.sort()
    body = b""
    last = 0
    for tick, _, status, pitch, vel in timed:
        body += vlq(tick - last) + bytes([status, pitch, vel])
        last = tick
    return smf(0, tpq, chunk(b"MTrk", body + bytes([0x00, 0xFF, 0x2F, 0x00])))


# -- corpus ----------------------------------------------------------------

# 1. One note: on at tick 0, off at tick 480, 480 tpq, default 120 bpm.
FILE_SINGLE = smf(0, 480, track(
    bytes([0x00, 0x90, 60, 64]),
    vlq(480) + bytes([0x80, 60, 0x40]),
))

# 2. Running status: two overlapping notes share one 0x90 status byte and
#    close via velocity-0 note-ons, still under running status.
FILE_RUNNING = smf(0, 480, track(
    bytes([0x00, 0x90, 60, 100]),
    vlq(240) + bytes([64, 100]),        # running 0x90: on pitch 64
    vlq(240) + bytes([60, 0]),          # running 0x90 vel 0: off pitch 60
    vlq(240) + bytes([64, 0]),          # off pitch 64
))

# 3. Tempo change mid-note: 120 bpm for the first 480 ticks, then 240 bpm.
FILE_TEMPO = smf(0, 480, track(
    tempo_event(0, 500000),
    bytes([0x00, 0x90, 72, 80]),
    tempo_event(480, 250000),
    vlq(480) + bytes([0x80, 72, 0x40]),
))

# 4. Format 1: tempo-only conductor track plus a note track, merged timeline.
FILE_FORMAT1 = smf(
    1, 480,
    track(tempo_event(0, 600000)),
    track(
        bytes([0x00, 0x90, 55, 33]),
        vlq(960) + bytes([0x80, 55, 0x40]),
    ),
)

# 5. Noise tolerance: program change, control change, pitch bend, sysex, and
#    a text meta event interleaved with one note; all must be skipped.
FILE_NOISY = smf(0, 480, track(
    bytes([0x00, 0xC0, 0x05]),                       # program change
    bytes([0x00, 0xB0, 0x07, 0x64]),                 # control change
    bytes([0x00, 0xF0]) + vlq(3) + b"\x01\x02\xf7",  # sysex
    bytes([0x00, 0xFF, 0x01]) + vlq(5) + b"hello",   # text meta
    bytes([0x00, 0x90, 69, 90]),
    bytes([0x10, 0xE0, 0x00, 0x40]),                 # pitch bend mid-note
    vlq(0x68) + bytes([0x80, 69, 0x40]),             # off at tick 0x78=120
))

# 6. Two same-pitch onsets before any release: first-on/first-off pairing.
FILE_OVERLAP = smf(0, 480, track(
    bytes([0x00, 0x90, 60, 10]),
    vlq(120) + bytes([0x90, 60, 20]),
    vlq(120) + bytes([0x80, 60, 0x40]),   # closes the velocity-10 note
    vlq(120) + bytes([0x80, 60, 0x40]),   # closes the velocity-20 note
))


class TestVarint:
    def test_paper_smf_example(self):
        assert read_varint(bytes([0x81, 0x48])) == (200, 2)

    def test_single_byte_values(self):
        for v in (0, 1, 0x40, 0x7F):
            assert read_varint(bytes([v])) == (v, 1)

    def test_round_trip_with_writer(self):
        for v in (0, 127, 128, 200, 16383, 16384, 0x0FFFFFFF):
            data = vlq(v)
            assert read_varint(data) == (v, len(data))

    def test_truncated_and_overlong(self):
        with pytest.raises(MidiParseError):
            read_varint(bytes([0x81]))
        with pytest.raises(MidiParseError):
            read_varint(bytes([0x81, 0x81, 0x81, 0x81, 0x01]))


class TestTempoMap:
    def test_default_tempo(self):
        tm = TempoMap(480)
        assert tm.seconds(480) == pytest.approx(0.5)
        assert tm.seconds(0) == 0.0

    def test_piecewise_integration(self):
        tm = TempoMap(480, [(480, 250000)])
        assert tm.seconds(960) == pytest.approx(0.75)
        assert tm.seconds(480) == pytest.approx(0.5)

    def test_same_tick_change_last_wins(self):
        tm = TempoMap(480, [(0, 1000000), (0, 250000)])
        assert tm.seconds(480) == pytest.approx(0.25)

    def test_validation(self):
        with pytest.raises(DomainError):
            TempoMap(0)
        with pytest.raises(DomainError):
            TempoMap(480, [(0, 0)])
        with pytest.raises(DomainError):
            TempoMap(480).seconds(-1)


class TestCorpus:
    def test_single_note(self):
        notes = parse_smf(FILE_SINGLE)
        assert notes == [MidiNote(pitch=60, onset_s=0.0, release_s=0.5, velocity=64)]

    def test_running_status_and_velocity_zero_off(self):
        notes = parse_smf(FILE_RUNNING)
        assert notes == [
            MidiNote(pitch=60, onset_s=0.0, release_s=0.5, velocity=100),
            MidiNote(pitch=64, onset_s=0.25, release_s=0.75, velocity=100),
        ]

    def test_tempo_change_mid_note(self):
        # 480 ticks at 500000 us/q = 0.5 s, then 480 ticks at 250000 = 0.25 s.
        notes = parse_smf(FILE_TEMPO)
        assert notes == [MidiNote(pitch=72, onset_s=0.0, release_s=0.75, velocity=80)]

    def test_format1_merges_conductor_track(self):
        # 960 ticks at 600000 us per 480-tick quarter = 1.2 s.
        notes = parse_smf(FILE_FORMAT1)
        assert len(notes) == 1
        assert notes[0].pitch == 55 and notes[0].velocity == 33
        assert notes[0].release_s == pytest.approx(1.2)

    def test_unknown_events_skipped(self):
        notes = parse_smf(FILE_NOISY)
        assert notes == [MidiNote(pitch=69, onset_s=0.0, release_s=120 / 960, velocity=90)]

    def test_overlapping_same_pitch_fifo(self):
        notes = parse_smf(FILE_OVERLAP)
        assert [n.velocity for n in notes] == [10, 20]
        assert notes[0].onset_s == 0.0
        assert notes[0].release_s == pytest.approx(0.25)
        assert notes[1].onset_s == pytest.approx(0.125)
        assert notes[1].release_s == pytest.approx(0.375)

    def test_round_trip_through_writer(self):
        for blob in (FILE_SINGLE, FILE_RUNNING, FILE_TEMPO, FILE_FORMAT1, FILE_NOISY, FILE_OVERLAP):
            notes = parse_smf(blob)
            assert parse_smf(write_smf(notes)) == notes

    def test_dangling_note_on_dropped(self):
        blob = smf(0, 480, track(bytes([0x00, 0x90, 60, 64])))
        assert parse_smf(blob) == []


class TestParseErrors:
    def test_bad_magic_with_offset(self):
        with pytest.raises(MidiParseError) as exc:
            parse_smf(b"RIFF" + FILE_SINGLE[4:])
        assert exc.value.offset == 0

    def test_short_file(self):
        with pytest.raises(MidiParseError):
            parse_smf(b"MThd")

    def test_format_2_rejected(self):
        with pytest.raises(MidiParseError) as exc:
            parse_smf(smf(2, 480, track(), track()))
        assert exc.value.offset == 8

    def test_smpte_division_rejected(self):
        blob = chunk(b"MThd", (0).to_bytes(2, "big") + (1).to_bytes(2, "big") + b"\xe7\x28")
        with pytest.raises(MidiParseError) as exc:
            parse_smf(blob + track())
        assert exc.value.offset == 12

    def test_truncated_track_chunk(self):
        body = header(0, 1, 480) + b"MTrk" + (100).to_bytes(4, "big") + b"\x00"
        with pytest.raises(MidiParseError):
            parse_smf(body)

    def test_missing_track(self):
        with pytest.raises(MidiParseError):
            parse_smf(header(1, 2, 480) + track())

    def test_data_byte_without_running_status(self):
        blob = smf(0, 480, track(bytes([0x00, 0x3C, 0x40])))
        with pytest.raises(MidiParseError, match="running status"):
            parse_smf(blob)

    def test_meta_cancels_running_status(self):
        blob = smf(0, 480, track(
            bytes([0x00, 0x90, 60, 64]),
            bytes([0x00, 0xFF, 0x01]) + vlq(2) + b"ab",
            bytes([0x00, 60, 0]),   # running status no longer valid
        ))
        with pytest.raises(MidiParseError, match="running status"):
            parse_smf(blob)

    def test_track_without_end_marker(self):
        blob = smf(0, 480, chunk(b"MTrk", bytes([0x00, 0x90, 60, 64])))
        with pytest.raises(MidiParseError, match="end-of-track"):
            parse_smf(blob)

    def test_bytes_after_end_of_track(self):
        blob = smf(0, 480, chunk(b"MTrk", bytes([0x00, 0xFF, 0x2F, 0x00, 0x00])))
        with pytest.raises(MidiParseError, match="after end-of-track"):
            parse_smf(blob)

    def test_high_data_byte_rejected(self):
        blob = smf(0, 480, track(bytes([0x00, 0x90, 0x81, 0x40])))
        with pytest.raises(MidiParseError, match="high bit"):
            parse_smf(blob)

    def test_error_carries_byte_offset(self):
        # 14 header bytes + 8 chunk prefix, delta byte at 22, status at 23.
        blob = smf(0, 480, track(bytes([0x00, 0x3C, 0x40])))
        with pytest.raises(MidiParseError) as exc:
            parse_smf(blob)
        assert exc.value.offset == 23
        assert "0x3c" in str(exc.value)


class TestOnsetsToGrid:
    DT = 512 / 22050

    def test_hop_grid_example(self):
        notes = [MidiNote(pitch=60, onset_s=1.0, release_s=1.5, velocity=64)]
        grid = onsets_to_grid(notes, self.DT, 256, (60, 67))
        assert grid.pairs() == [(0, 43)]

    def test_empty_list(self):
        grid = onsets_to_grid([], 0.1, 16, (0, 127))
        assert grid.event_count == 0
        assert grid.n_units == 128 and grid.n_steps == 16

    def test_same_cell_collapses(self):
        notes = [
            MidiNote(pitch=61, onset_s=0.100, release_s=0.2, velocity=64),
            MidiNote(pitch=61, onset_s=0.101, release_s=0.3, velocity=64),
        ]
        grid = onsets_to_grid(notes, 0.1, 16, (60, 62))
        assert grid.pairs() == [(1, 1)]

    def test_out_of_range_pitch_and_late_onsets_dropped(self):
        notes = [
            MidiNote(pitch=10, onset_s=0.0, release_s=0.1, velocity=64),
            MidiNote(pitch=60, onset_s=99.0, release_s=99.1, velocity=64),
            MidiNote(pitch=60, onset_s=0.0, release_s=0.1, velocity=64),
        ]
        grid = onsets_to_grid(notes, 0.1, 16, (60, 62))
        assert grid.pairs() == [(0, 0)]

    def test_grid_events_bounded_by_notes(self):
        rng = np.random.default_rng(0)
        notes = [
            MidiNote(pitch=int(rng.integers(50, 70)), onset_s=float(rng.uniform(0, 3)),
                     release_s=4.0, velocity=1)
            for _ in range(50)
        ]
        grid = onsets_to_grid(notes, 0.05, 64, (50, 69))
        assert grid.event_count <= len(notes)

    def test_validation(self):
        with pytest.raises(DomainError):
            onsets_to_grid([], 0.0, 4, (0, 1))
        with pytest.raises(DomainError):
            onsets_to_grid([], 0.1, 4, (5, 2))


class TestMidiNoteValidation:
    def test_ranges(self):
        with pytest.raises(DomainError):
            MidiNote(pitch=128, onset_s=0, release_s=1, velocity=64)
        with pytest.raises(DomainError):
            MidiNote(pitch=60, onset_s=0, release_s=1, velocity=0)
        with pytest.raises(DomainError):
            MidiNote(pitch=60, onset_s=2.0, release_s=1.0, velocity=64)
