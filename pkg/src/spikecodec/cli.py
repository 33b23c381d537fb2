"""Command-line surface over the codec, generator, trainer, and analysis.

Every command is a deterministic wrapper: fixed seeds and inputs produce
byte-identical output files.  Output files are written to a temp path and
atomically renamed, so a failing command never leaves partial artifacts.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analysis, codec, cost_model, event_matrix, synthdata
from .errors import (
    CorruptStreamError,
    DivergenceError,
    DomainError,
    MidiParseError,
    ShapeError,
    SpikecodecError,
    TruncatedStreamError,
)
from .toynet import checkpoint as ckpt
from .toynet.model import encode_to_matrix
from .toynet.train import TrainConfig, Variant, train


def _write_atomic(path: Path, payload: bytes | str) -> None:
    """Write whole files only: temp file in the target directory, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(payload, bytes) else "w"
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read_bytes(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise DomainError(f"no such file: {path}")
    return p.read_bytes()


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise DomainError(f"no such file: {path}")
    return p.read_text()


def _write_wav_atomic(path: Path, wav: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        synthdata.write_wav(tmp, wav, normalize=True)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


# -- cost ---------------------------------------------------------------------


def cmd_cost(args) -> int:
    if args.matrix is not None:
        m = event_matrix.load_text(_read_text(args.matrix))
        n, t, s = m.n_units, m.n_steps, m.event_count
    else:
        if None in (args.n, args.t, args.s):
            raise UsageError("either --matrix or all of --n/--t/--s are required")
        n, t, s = args.n, args.t, args.s
    report = codec.cost_report(n, t, s)
    paper = {
        "dense": codec.cost_dense(n, t),
        "coo": codec.cost_coo(n, t, s),
        "time": codec.cost_time(n, t, s, mode="paper"),
        "units": codec.cost_units(n, t, s, mode="paper"),
    }
    exact = {
        "dense": report.bits_dense,
        "coo": report.bits_coo,
        "time": report.bits_time,
        "units": report.bits_units,
    }
    lines = [f"N={n} T={t} S={s}", "format,bits_exact,bits_paper"]
    lines += [f"{name},{exact[name]},{paper[name]}" for name in ("dense", "coo", "time", "units")]
    best_paper = min(paper, key=lambda k: (paper[k], ("dense", "coo", "time", "units").index(k)))
    lines.append(f"best_exact={report.best.short_name}")
    lines.append(f"best_paper={best_paper}")
    out = "\n".join(lines) + "\n"
    if args.out:
        _write_atomic(Path(args.out), out)
    sys.stdout.write(out)
    return 0


# -- sweep ----------------------------------------------------------------------


def _sweep_svg(table: cost_model.RegimeTable) -> str:
    """Hand-rolled, byte-stable SVG of the four cost curves over S."""
    width_px, height_px, pad = 800.0, 500.0, 60.0
    rows = table.rows
    xs = np.array([max(r.s, 1) for r in rows], dtype=np.float64)
    series = {
        "dense": np.array([r.bits_dense for r in rows], dtype=np.float64),
        "coo": np.array([r.bits_coo for r in rows], dtype=np.float64),
        "time": np.array([r.bits_time for r in rows], dtype=np.float64),
        "units": np.array([r.bits_units for r in rows], dtype=np.float64),
    }
    colors = {"dense": "#000000", "coo": "#1f77b4", "time": "#d62728", "units": "#2ca02c"}
    log_x = np.log10(xs)
    y_all = np.maximum(np.concatenate(list(series.values())), 1.0)
    log_y = np.log10(y_all)
    x0, x1 = float(log_x.min()), float(log_x.max())
    y0, y1 = float(log_y.min()), float(log_y.max())
    x_span = (x1 - x0) or 1.0
    y_span = (y1 - y0) or 1.0

    def sx(v: float) -> float:
        return pad + (np.log10(max(v, 1.0)) - x0) / x_span * (width_px - 2 * pad)

    def sy(v: float) -> float:
        return height_px - pad - (np.log10(max(v, 1.0)) - y0) / y_span * (height_px - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px:.0f}" height="{height_px:.0f}" '
        f'viewBox="0 0 {width_px:.0f} {height_px:.0f}">',
        f'<rect width="{width_px:.0f}" height="{height_px:.0f}" fill="#ffffff"/>',
        f'<text x="{width_px / 2:.1f}" y="24" text-anchor="middle" font-size="16">'
        f"storage cost vs event count (N={table.n}, T={table.t})</text>",
    ]
    for name, ys in series.items():
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colors[name]}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{sx(xs[-1]) - 48:.2f}" y="{sy(ys[-1]) - 6:.2f}" font-size="12" '
            f'fill="{colors[name]}">{name}</text>'
        )
    for s, fmt in table.boundaries()[1:]:
        parts.append(
            f'<line x1="{sx(s):.2f}" y1="{pad:.1f}" x2="{sx(s):.2f}" y2="{height_px - pad:.1f}" '
            f'stroke="#888888" stroke-dasharray="4,3"/>'
        )
        parts.append(
            f'<text x="{sx(s) + 4:.2f}" y="{pad + 14:.1f}" font-size="11">S={s}: {fmt.short_name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_sweep(args) -> int:
    s_values = None
    if args.s_max is not None:
        s_values = range(0, args.s_max + 1)
    table = cost_model.regime_sweep(args.n, args.t, s_values)
    _write_atomic(Path(args.out), table.to_csv())
    if args.svg:
        _write_atomic(Path(args.svg), _sweep_svg(table))
    for s, fmt in table.boundaries():
        print(f"S>={s}: {fmt.short_name}")
    return 0


# -- pack / unpack ---------------------------------------------------------------


def _format_from_name(name: str) -> codec.StorageFormat | str:
    if name == "auto":
        return "auto"
    return next(f for f in codec.StorageFormat if f.short_name == name)


def cmd_pack(args) -> int:
    samples = [event_matrix.load_text(_read_text(p)) for p in args.matrices]
    blob = codec.pack_stream(samples, choose=_format_from_name(args.format))
    _write_atomic(Path(args.out), blob)
    print(f"packed {len(samples)} samples into {len(blob)} bytes")
    return 0


def cmd_unpack(args) -> int:
    samples = codec.unpack_stream(_read_bytes(args.stream))
    digits = max(len(str(max(len(samples) - 1, 0))), 1)
    for i, m in enumerate(samples):
        _write_atomic(Path(f"{args.out_prefix}{i:0{digits}d}.txt"), event_matrix.save_text(m))
    print(f"unpacked {len(samples)} samples")
    return 0


# -- synth -----------------------------------------------------------------------


def cmd_synth(args) -> int:
    bank = synthdata.default_bank(args.k)
    grid = synthdata.sample_score(args.seed, args.k, args.t, args.rate)
    wav = synthdata.render(grid, bank)
    wav_path = Path(f"{args.out_prefix}.wav")
    _write_wav_atomic(wav_path, wav)
    _write_atomic(Path(f"{args.out_prefix}_grid.txt"), event_matrix.save_text(grid))
    print(f"wrote {wav_path} ({len(wav)} samples) and {args.out_prefix}_grid.txt ({grid.event_count} onsets)")
    return 0


# -- train ------------------------------------------------------------------------


TRAIN_INT_KEYS = {"seed", "batch_size", "n_units", "t_z", "features", "hidden"}
TRAIN_FLOAT_KEYS = {"b0", "gamma_inf", "lr"}
TRAIN_STR_KEYS = {"mu_sites", "dtype"}
DATA_KEYS = {"data_seed": 1000, "n_train": 96, "onset_rate": 0.02}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and '#' comments are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_train_config(variant: Variant, pairs: dict[str, str]) -> tuple[TrainConfig, dict]:
    kwargs: dict = {"variant": variant}
    data = dict(DATA_KEYS)
    for key, value in pairs.items():
        try:
            if key in TRAIN_INT_KEYS:
                kwargs[key] = int(value)
            elif key in TRAIN_FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in TRAIN_STR_KEYS:
                kwargs[key] = value
            elif key == "phase_steps":
                parts = tuple(int(v) for v in value.split(","))
                kwargs[key] = parts
            elif key in ("data_seed", "n_train"):
                data[key] = int(value)
            elif key == "onset_rate":
                data[key] = float(value)
            else:
                raise UsageError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise UsageError(f"config key {key!r}: {exc}") from exc
    return TrainConfig(**kwargs), data


def cmd_train(args) -> int:
    pairs: dict[str, str] = {}
    if args.config:
        pairs.update(parse_config_text(_read_text(args.config)))
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    variant = {"free": Variant.FREE, "sparse": Variant.SPARSE, "mu-sparse": Variant.MU_SPARSE}[args.variant]
    cfg, data = build_train_config(variant, pairs)
    dataset = synthdata.make_dataset(
        seed=data["data_seed"],
        n_samples=data["n_train"],
        n_steps=cfg.t_z,
        onset_rate=data["onset_rate"],
    )
    model, log = train(cfg, dataset.features)
    _write_atomic(Path(f"{args.out_prefix}.spkn"), ckpt.save_checkpoint(model))
    _write_atomic(Path(f"{args.out_prefix}_metrics.csv"), log.to_csv())
    last = log.rows[-1]
    print(
        f"trained {cfg.variant.value} for {cfg.total_steps} steps: "
        f"loss_x={last[1]:.6g} mean_S={last[4]:.6g} density={last[5]:.4f}"
    )
    return 0


# -- encode / decode ---------------------------------------------------------------


def _load_model(path: str):
    return ckpt.load_checkpoint(_read_bytes(path))


def _wav_to_features(path: str, model) -> np.ndarray:
    wav, rate = synthdata.read_wav(path)
    return synthdata.features(wav, n_bands=model.cfg.features, sample_rate=rate)


def cmd_encode(args) -> int:
    model = _load_model(args.checkpoint)
    frames = _wav_to_features(args.wav, model)
    m = encode_to_matrix(model, frames, mu=args.mu)
    _write_atomic(Path(args.out), codec.pack_stream([m], choose=_format_from_name(args.format)))
    report = codec.cost_report(m.n_units, m.n_steps, m.event_count)
    print(f"S={m.event_count} density={m.density:.4f} best={report.best.short_name} "
          f"bits={report.bits(report.best)}")
    return 0


def cmd_decode(args) -> int:
    model = _load_model(args.checkpoint)
    samples = codec.unpack_stream(_read_bytes(args.stream))
    if len(samples) != 1:
        raise DomainError(f"expected a single-sample stream, found {len(samples)} samples")
    m = samples[0]
    if m.n_units != model.cfg.n_units:
        raise ShapeError(f"stream has {m.n_units} units, checkpoint expects {model.cfg.n_units}")
    from .toynet.autodiff import Tensor

    z = Tensor(m.to_dense().astype(model.cfg.np_dtype).reshape(1, m.n_units, m.n_steps))
    mu = None if args.mu is None else np.array([args.mu])
    frames = model.decode_frames(z, mu).data[0]
    wav = synthdata.resynthesize(frames.astype(np.float64))
    _write_wav_atomic(Path(args.out), wav)
    print(f"decoded {m.event_count} events into {len(wav)} samples")
    return 0


# -- analyze -------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    model = _load_model(args.checkpoint)
    dataset = synthdata.make_dataset(
        seed=args.seed, n_samples=args.n_samples, n_steps=args.t,
        onset_rate=args.rate,
    )
    mu = None if args.mu is None else args.mu
    z_samples = [encode_to_matrix(model, dataset.features[i], mu=mu) for i in range(dataset.n_samples)]
    vol = analysis.cross_correlation(z_samples, dataset.grids, w=args.w)
    prom = analysis.peak_prominence(vol, p=args.p)
    _write_atomic(Path(f"{args.out_prefix}_correlation.csv"), vol.to_csv())
    _write_atomic(Path(f"{args.out_prefix}_prominence.csv"), prom.to_csv())
    table = analysis.selectivity_report(prom, top_k=args.top_k, anchor_note=args.anchor)
    _write_atomic(Path(f"{args.out_prefix}_selectivity.csv"), table.to_csv())
    print(f"prominence dispersion: {prom.dispersion():.6g}")
    return 0


# -- mu-select ----------------------------------------------------------------------


def select_mu(model, frames_list: list[np.ndarray], min_sisnr: float) -> tuple[int, float, bool]:
    """Largest mu whose reconstructions meet the SI-SNR floor on every clip.

    Scans mu = 31 down to 0; returns (mu, mean best-format bits, fallback)
    where fallback means no mu met the floor and 0 was returned.
    """
    from .toynet.autodiff import Tensor

    for mu in range(31, -1, -1):
        scores = []
        bits = []
        for frames in frames_list:
            m = encode_to_matrix(model, frames, mu=mu)
            z = Tensor(m.to_dense().astype(model.cfg.np_dtype).reshape(1, m.n_units, m.n_steps))
            recon = model.decode_frames(z, np.array([mu])).data[0]
            scores.append(analysis.si_snr(frames, recon))
            report = codec.cost_report(m.n_units, m.n_steps, m.event_count)
            bits.append(report.bits(report.best))
        if min(scores) >= min_sisnr:
            return mu, float(np.mean(bits)), False
    # rescore mu=0 for the bits figure
    bits = []
    for frames in frames_list:
        m = encode_to_matrix(model, frames, mu=0)
        report = codec.cost_report(m.n_units, m.n_steps, m.event_count)
        bits.append(report.bits(report.best))
    return 0, float(np.mean(bits)), True


def cmd_mu_select(args) -> int:
    model = _load_model(args.checkpoint)
    frames_list = [_wav_to_features(p, model) for p in args.wavs]
    mu, bits, fallback = select_mu(model, frames_list, args.min_sisnr)
    if fallback:
        print("warning: no mu meets the SI-SNR floor; falling back to mu=0", file=sys.stderr)
    print(f"mu={mu} mean_bits={bits:.10g} fallback={str(fallback).lower()}")
    return 0


# -- parser -------------------------------------------------------------------------


class UsageError(SpikecodecError):
    """Bad flag combination detected after argparse."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikecodec",
        description="Event-matrix compression toolkit: codec, toy models, analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost", help="storage cost of one matrix shape")
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--matrix", help="event matrix text file instead of --n/--t/--s")
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("sweep", help="cost regimes over the event count S")
    p.add_argument("--n", type=int, default=80)
    p.add_argument("--t", type=int, default=1024)
    p.add_argument("--s-max", type=int, default=None, help="sweep S=0..s_max (default N*T)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--svg", help="optional SVG plot path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pack", help="pack matrix text files into a .spkm stream")
    p.add_argument("matrices", nargs="+", help="event matrix text files")
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="auto", choices=["auto", "dense", "coo", "time", "units"])
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("unpack", help="unpack a .spkm stream into matrix text files")
    p.add_argument("stream", help=".spkm input path")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_unpack)

    p = sub.add_parser("synth", help="generate a toy-piano clip and its onset grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--t", type=int, default=256)
    p.add_argument("--rate", type=float, default=0.02)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a toy autoencoder on synthetic data")
    p.add_argument("--variant", required=True, choices=["free", "sparse", "mu-sparse"])
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode a wav into a .spkm event stream")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--mu", type=int, default=None)
    p.add_argument("--format", default="auto", choices=["auto", "dense", "coo", "time", "units"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a .spkm stream back to audio")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("stream", help=".spkm input path")
    p.add_argument("--mu", type=int, default=None)
    p.add_argument("--out", required=True, help="output wav path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("analyze", help="unit/note correlation and prominence reports")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=2000)
    p.add_argument("--n-samples", type=int, default=32)
    p.add_argument("--t", type=int, default=256)
    p.add_argument("--rate", type=float, default=0.02)
    p.add_argument("--mu", type=int, default=None)
    p.add_argument("--w", type=int, default=50)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--top-k", type=int, default=15)
    p.add_argument("--anchor", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("mu-select", help="largest mu meeting an SI-SNR floor")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--min-sisnr", type=float, default=9.0)
    p.add_argument("wavs", nargs="+", help="test clips")
    p.set_defaults(func=cmd_mu_select)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (
        DomainError,
        ShapeError,
        MidiParseError,
        CorruptStreamError,
        TruncatedStreamError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
