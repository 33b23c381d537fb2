"""Synthetic toy-piano corpus: aligned waveforms, feature frames, note grids.

A score is a binary note-by-step onset grid on the feature-frame hop grid,
so note onsets and latent steps share a timeline by construction.  Each
onset contributes an exponentially decaying stack of harmonics starting at
sample ``step * hop``; rendering is a pure linear superposition of one
precomputed template per note.  Features are mel-spaced band averages of
log(1 + magnitude) over Hann-windowed frames.
"""

from __future__ import annotations

import wave as _wave
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .event_matrix import EventMatrix

SAMPLE_RATE = 22050
WINDOW = 1024
HOP = 512
N_BANDS = 64


@dataclass(frozen=True)
class Note:
    fundamental_hz: float
    harmonics: tuple[float, ...] = (1.0, 0.5, 1.0 / 3.0, 0.25)
    decay_per_s: float = 8.0

    def __post_init__(self):
        if self.fundamental_hz <= 0 or self.decay_per_s <= 0 or len(self.harmonics) < 1:
            raise DomainError("note needs positive fundamental, positive decay, >= 1 harmonic")


@dataclass(frozen=True)
class NoteBank:
    notes: tuple[Note, ...]

    def __post_init__(self):
        if len(self.notes) < 1:
            raise DomainError("bank needs at least one note")
        funds = [n.fundamental_hz for n in self.notes]
        if len(set(funds)) != len(funds):
            raise DomainError("fundamentals must be distinct")

    @property
    def n_notes(self) -> int:
        return len(self.notes)


def default_bank(k: int = 8) -> NoteBank:
    """k toy notes with fundamentals spanning two octaves from 220 Hz."""
    if k < 1:
        raise DomainError("k must be >= 1")
    step = 2.0 / max(k - 1, 1)
    return NoteBank(tuple(Note(fundamental_hz=220.0 * 2.0 ** (step * i)) for i in range(k)))


class NoteGrid(EventMatrix):
    """Binary note-onset matrix; units are notes on the hop-step timeline."""

    @property
    def n_notes(self) -> int:
        return self.n_units

    @property
    def onsets(self) -> list[tuple[int, int]]:
        return self.pairs()


def sample_score(seed: int, k: int, t: int, onset_rate: float) -> NoteGrid:
    """Independent Bernoulli(onset_rate) onsets per (note, step) cell."""
    if not 0.0 <= onset_rate <= 1.0:
        raise DomainError(f"onset_rate must lie in [0, 1], got {onset_rate}")
    rng = np.random.default_rng(seed)
    mask = rng.random((k, t)) < onset_rate
    units, steps = np.nonzero(mask)
    return NoteGrid(k, t, list(zip(units.tolist(), steps.tolist())))


def _note_template(note: Note, sample_rate: int, max_len: int) -> np.ndarray:
    """Decaying harmonic stack from its onset; aliasing harmonics dropped."""
    nyquist = sample_rate / 2.0
    if note.fundamental_hz >= nyquist:
        raise DomainError(f"fundamental {note.fundamental_hz} Hz at or above Nyquist")
    # Cut the template where the envelope drops below 1e-5 of its start.
    horizon = int(np.ceil(sample_rate * np.log(1e5) / note.decay_per_s))
    length = min(max_len, horizon)
    t = np.arange(length, dtype=np.float64) / sample_rate
    env = np.exp(-note.decay_per_s * t)
    out = np.zeros(length, dtype=np.float64)
    for h, amp in enumerate(note.harmonics, start=1):
        freq = h * note.fundamental_hz
        if freq >= nyquist:
            continue
        out += amp * np.sin(2.0 * np.pi * freq * t)
    return out * env


def render(
    grid: NoteGrid,
    bank: NoteBank,
    sample_rate: int = SAMPLE_RATE,
    hop: int = HOP,
) -> np.ndarray:
    """Superpose note templates at each onset's sample position.

    Output length is (n_steps + 1) * hop so that a window of 2 * hop slides
    to exactly n_steps feature frames.
    """
    if grid.n_units != bank.n_notes:
        raise ShapeError(f"grid has {grid.n_units} notes, bank has {bank.n_notes}")
    length = (grid.n_steps + 1) * hop
    out = np.zeros(length, dtype=np.float64)
    templates = [_note_template(n, sample_rate, length) for n in bank.notes]
    for unit, step in grid.pairs():
        start = step * hop
        tpl = templates[unit]
        stop = min(start + len(tpl), length)
        out[start:stop] += tpl[: stop - start]
    return out


def band_edges(window: int = WINDOW, sample_rate: int = SAMPLE_RATE, n_bands: int = N_BANDS) -> np.ndarray:
    """FFT-bin edges of the mel-spaced bands: n_bands + 1 strictly increasing
    indices into the rfft bins, first 0, last window // 2 + 1."""
    n_bins = window // 2 + 1
    if n_bands >= n_bins:
        raise DomainError(f"{n_bands} bands need more than {n_bins} fft bins")
    nyquist = sample_rate / 2.0

    def mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def inv_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    hz = inv_mel(np.linspace(0.0, mel(nyquist), n_bands + 1))
    freqs = np.fft.rfftfreq(window, 1.0 / sample_rate)
    edges = np.searchsorted(freqs, hz[1:-1], side="left")
    edges = np.concatenate(([0], edges, [n_bins]))
    # Low mel bands can be narrower than one bin; force each band nonempty.
    for i in range(1, n_bands + 1):
        edges[i] = max(edges[i], edges[i - 1] + 1)
    if edges[-1] != n_bins:
        raise DomainError("band edges exceed the fft bin count")
    return edges


def band_centers(window: int = WINDOW, sample_rate: int = SAMPLE_RATE, n_bands: int = N_BANDS) -> np.ndarray:
    """Center frequency in Hz of each band (midpoint of its bin range)."""
    freqs = np.fft.rfftfreq(window, 1.0 / sample_rate)
    edges = band_edges(window, sample_rate, n_bands)
    return np.array([(freqs[a] + freqs[b - 1]) / 2.0 for a, b in zip(edges[:-1], edges[1:])])


def features(
    waveform: np.ndarray,
    window: int = WINDOW,
    hop: int = HOP,
    n_bands: int = N_BANDS,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """Mel-band log(1 + magnitude) frames, shape (n_bands, n_frames)."""
    wav = np.asarray(waveform, dtype=np.float64)
    if wav.ndim != 1:
        raise ShapeError(f"waveform must be 1-d, got shape {wav.shape}")
    if len(wav) < window:
        raise ShapeError(f"waveform of {len(wav)} samples is shorter than one {window}-sample window")
    n_frames = (len(wav) - window) // hop + 1
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = wav[idx] * np.hanning(window)
    mag = np.abs(np.fft.rfft(frames, axis=1))  # (n_frames, n_bins)
    edges = band_edges(window, sample_rate, n_bands)
    banded = np.add.reduceat(mag, edges[:-1], axis=1) / np.diff(edges)
    return np.log1p(banded).T


def resynthesize(
    frames: np.ndarray,
    window: int = WINDOW,
    hop: int = HOP,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """Crude sinusoidal inversion of ``features`` for listening spot-checks.

    Each band becomes one phase-continuous sinusoid at the band's center
    frequency, amplitude-modulated by the Hann-overlap-add interpolation of
    the band's per-frame magnitude.  This is deliberately minimal: it keeps
    band energies and timing, not true spectral shape.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError(f"expected (n_bands, n_frames) features, got shape {frames.shape}")
    n_bands, n_frames = frames.shape
    length = window + (n_frames - 1) * hop
    win = np.hanning(window)
    # Per-sample interpolation weights shared by every band.
    weight = np.zeros(length)
    for t in range(n_frames):
        weight[t * hop : t * hop + window] += win
    safe = np.where(weight > 0, weight, 1.0)
    centers = band_centers(window, sample_rate, n_bands)
    phase = 2.0 * np.pi * np.arange(length) / sample_rate
    out = np.zeros(length)
    magnitudes = np.expm1(np.maximum(frames, 0.0))
    for f in range(n_bands):
        env = np.zeros(length)
        for t in range(n_frames):
            env[t * hop : t * hop + window] += magnitudes[f, t] * win
        env /= safe
        # A Hann-windowed unit sinusoid has in-band rfft magnitude near
        # window / 4; undo that scale.
        out += env * np.sin(centers[f] * phase) * (4.0 / window)
    return out


@dataclass
class Dataset:
    """Aligned corpus: features[i] is (n_bands, n_steps) for grids[i]."""

    features: np.ndarray
    grids: list[NoteGrid] = field(repr=False)
    bank: NoteBank = field(repr=False)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


def make_dataset(
    seed: int,
    n_samples: int,
    n_steps: int = 256,
    onset_rate: float = 0.02,
    bank: NoteBank | None = None,
    sample_rate: int = SAMPLE_RATE,
    hop: int = HOP,
    window: int = WINDOW,
    n_bands: int = N_BANDS,
) -> Dataset:
    """Generate n_samples aligned (features, grid) pairs, one seed per sample."""
    bank = bank if bank is not None else default_bank()
    grids = [sample_score(seed + i, bank.n_notes, n_steps, onset_rate) for i in range(n_samples)]
    feats = np.stack([
        features(render(g, bank, sample_rate, hop), window, hop, n_bands, sample_rate)
        for g in grids
    ]).astype(np.float32)
    return Dataset(features=feats, grids=grids, bank=bank)


def write_wav(path, waveform: np.ndarray, sample_rate: int = SAMPLE_RATE, normalize: bool = False) -> None:
    """PCM 16-bit mono output; values outside [-1, 1] are clipped."""
    wav = np.asarray(waveform, dtype=np.float64)
    if normalize:
        peak = np.abs(wav).max()
        if peak > 0:
            wav = wav / peak
    pcm = (np.clip(wav, -1.0, 1.0) * 32767.0).round().astype("<i2")
    with _wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(sample_rate)
        f.writeframes(pcm.tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read PCM 16-bit mono; returns (float waveform in [-1, 1], sample rate)."""
    with _wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1 or f.getsampwidth() != 2:
            raise DomainError("expected PCM 16-bit mono")
        rate = f.getframerate()
        raw = f.readframes(f.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0, rate
