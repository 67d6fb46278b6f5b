"""Command-line surface tying the pipeline stages together.

Exit codes: 0 success, 1 usage error, 2 data/format error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluate, fileio, plots
from .doa import AngleGrid, ArrayGeometry, music, pick_doa, srp_phat
from .masking import DpdParams, all_band_bins, oracle_masks, refine_dpd, select_bins
from .room import SceneComponents, perturb_scene, render_scene, scene_from_dict, scene_to_dict
from .stft import StftConfig, TimeSignal, band_bins, log_magnitude, stft


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except Exception:
        raise argparse.ArgumentTypeError(
            f"band must be LO:HI in Hz, got {text!r}")


def _geometry(args) -> ArrayGeometry:
    if args.geometry == "ula":
        return ArrayGeometry.ula(spacing=args.spacing)
    return ArrayGeometry.uca(radius=args.radius)


def _add_geometry_flags(p):
    p.add_argument("--geometry", choices=("ula", "uca"), default="ula")
    p.add_argument("--spacing", type=float, default=0.035,
                   help="ULA inter-mic spacing in meters")
    p.add_argument("--radius", type=float, default=0.035,
                   help="UCA radius in meters")


def _add_dpd_flags(p):
    p.add_argument("--band", type=_band, default=(1000.0, 8000.0),
                   help="analysis band LO:HI in Hz")
    p.add_argument("--n-select", type=int, default=1000)
    p.add_argument("--irm0", type=float, default=0.5)


def build_parser() -> _Parser:
    parser = _Parser(prog="dpd-doa",
                     description="DOA estimation with direct-path-dominance masking")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[], help="render a scene to WAV files")
    p.add_argument("--scene", required=True, help="scene JSON document")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scene rng_seed")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="geometry perturbation fraction")
    p.add_argument("--speech", default=None,
                   help="mono WAV source (default: built-in speech-shaped noise)")
    p.add_argument("--noise", default=None,
                   help="mono WAV noise source (default: built-in pink noise)")
    p.add_argument("--duration", type=float, default=evaluate.DEFAULT_DURATION,
                   help="built-in source duration in seconds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mask-oracle", help="compute oracle masks from components")
    p.add_argument("--direct", required=True)
    p.add_argument("--reverb", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--out", required=True, help="output .msk path")
    p.add_argument("--xi", type=float, default=1e-4)
    p.add_argument("--channel", type=int, default=0)
    p.set_defaults(func=cmd_mask_oracle)

    p = sub.add_parser("dpd", help="refine masks and select direct-path bins")
    p.add_argument("--masks", required=True, help="input .msk file")
    p.add_argument("--out", required=True, help="output bins CSV")
    p.add_argument("--sample-rate", type=float, default=16000.0)
    p.add_argument("--fft-size", type=int, default=512)
    _add_dpd_flags(p)
    p.set_defaults(func=cmd_dpd)

    p = sub.add_parser("doa", help="estimate the direction of arrival")
    p.add_argument("--input", required=True, help="multichannel mixture WAV")
    p.add_argument("--masks", default=None,
                   help=".msk file; omit to use all band bins")
    p.add_argument("--method", choices=("srp-phat", "music"), required=True)
    p.add_argument("--out", required=True, help="spectrum CSV path")
    p.add_argument("--c", type=float, default=343.0)
    p.add_argument("--fft-size", type=int, default=512)
    p.add_argument("--no-figure", action="store_true")
    _add_geometry_flags(p)
    _add_dpd_flags(p)
    p.set_defaults(func=cmd_doa)

    p = sub.add_parser("eval", help="run the accuracy evaluation harness")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--conditions", default="I",
                   help="comma-separated condition ids or 'all'")
    p.add_argument("--snrs", default="0,5,10,20",
                   help="comma-separated SNRs in dB ('inf' allowed)")
    p.add_argument("--methods",
                   default="srp_phat_all,music_all,srp_phat_masked,music_masked")
    p.add_argument("--n-trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=0.10)
    p.add_argument("--mask-dir", default=None,
                   help="directory of estimated .msk files for *_est methods")
    p.add_argument("--export-spx", default=None, metavar="DIR",
                   help="export per-trial mixture WAV/.spx/oracle .msk files")
    p.add_argument("--xi", type=float, default=1e-4)
    p.add_argument("--no-figure", action="store_true")
    _add_dpd_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-spec", help="export a normalized log-magnitude .spx")
    p.add_argument("--input", required=True, help="input WAV")
    p.add_argument("--out", required=True, help="output .spx path")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--fft-size", type=int, default=512)
    p.set_defaults(func=cmd_export_spec)

    return parser


def cmd_simulate(args) -> int:
    doc = json.loads(Path(args.scene).read_text())
    scene = scene_from_dict(doc)
    if args.seed is not None:
        scene = replace(scene, rng_seed=args.seed)
    if args.perturb > 0:
        scene = perturb_scene(scene, args.perturb, seed=scene.rng_seed)
    fs = 16000.0
    if args.speech:
        speech = fileio.read_wav(args.speech)
        fs = speech.sample_rate
    else:
        speech = evaluate.speech_shaped_noise(
            args.duration, fs, seed=evaluate.derive_seed(scene.rng_seed, "speech"))
    noise_src = None
    if args.noise:
        noise_src = fileio.read_wav(args.noise)
    elif not (math.isinf(scene.snr_db) and scene.snr_db > 0):
        noise_src = evaluate.pink_noise(
            speech.duration, fs, seed=evaluate.derive_seed(scene.rng_seed, "noise"))
    comps = render_scene(scene, speech, noise_src)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("direct", "reverb", "noise"):
        fileio.write_wav(out / f"{name}.wav", getattr(comps, name))
    # sum the float-32 components in float-32 so the written mixture equals
    # the sum of the written component files bit-for-bit
    mix32 = (comps.direct.data.astype(np.float32)
             + comps.reverb.data.astype(np.float32)
             + comps.noise.data.astype(np.float32))
    fileio.write_wav(out / "mixture.wav",
                     TimeSignal(data=mix32, sample_rate=comps.mixture.sample_rate))
    with open(out / "scene.json", "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
        fh.write("\n")
    print(out / "mixture.wav")
    return 0


def cmd_mask_oracle(args) -> int:
    direct = fileio.read_wav(args.direct)
    reverb = fileio.read_wav(args.reverb)
    noise = fileio.read_wav(args.noise)
    comps = SceneComponents(
        direct=direct, reverb=reverb, noise=noise,
        mixture=TimeSignal(data=direct.data + reverb.data + noise.data,
                           sample_rate=direct.sample_rate))
    cfg = StftConfig(sample_rate=direct.sample_rate)
    masks = oracle_masks(comps, cfg, ref_channel=args.channel, xi_n=args.xi)
    fileio.write_msk(args.out, masks)
    print(args.out)
    return 0


def cmd_dpd(args) -> int:
    masks = fileio.read_msk(args.masks)
    cfg = StftConfig(sample_rate=args.sample_rate, fft_size=args.fft_size)
    band = band_bins(cfg, *args.band)
    params = DpdParams(band=band, irm0=args.irm0, n_select=args.n_select)
    refined = refine_dpd(masks, args.irm0)
    bins = select_bins(refined, params)
    with open(args.out, "w") as fh:
        fh.write("frame,bin,irm_dpd\n")
        for t, f in bins.indices:
            fh.write(f"{t},{f},{float(refined.irm_dpd[t, f])!r}\n")
    _write_sidecar(args.out, {
        "n_bins_selected": len(bins), "n_select": args.n_select,
        "irm0": args.irm0, "band_hz": list(args.band),
        "provenance": masks.provenance,
    })
    print(len(bins))
    return 0


def cmd_doa(args) -> int:
    signal = fileio.read_wav(args.input)
    geom = _geometry(args)
    if signal.n_channels != geom.n_mics:
        raise ValueError(
            f"input has {signal.n_channels} channels, geometry expects "
            f"{geom.n_mics}")
    cfg = StftConfig(sample_rate=signal.sample_rate, fft_size=args.fft_size)
    spec = stft(signal, cfg)
    band = band_bins(cfg, *args.band)
    if args.masks:
        masks = fileio.read_msk(args.masks)
        if masks.shape != (spec.n_frames, spec.n_bins):
            raise ValueError(
                f"mask shape {masks.shape} does not match spectrogram "
                f"({spec.n_frames}, {spec.n_bins})")
        params = DpdParams(band=band, irm0=args.irm0, n_select=args.n_select)
        bins = select_bins(refine_dpd(masks, args.irm0), params)
    else:
        bins = all_band_bins(spec.n_frames, band)
    grid = AngleGrid()
    estimator = srp_phat if args.method == "srp-phat" else music
    spectrum = estimator(spec, bins, geom, grid, c=args.c)
    est = pick_doa(spectrum)
    fileio.write_spectrum_csv(args.out, spectrum)
    _write_sidecar(args.out, {
        "method": args.method, "geometry": args.geometry,
        "estimate_deg": est, "n_bins_used": len(bins),
        "band_hz": list(args.band), "n_select": args.n_select,
        "irm0": args.irm0, "c": args.c,
        "masks": args.masks,
    })
    if not args.no_figure:
        plots.save_spectrum_figure(spectrum, Path(args.out).with_suffix(".png"),
                                   estimate=est)
    print(f"{est:g}")
    return 0


def cmd_eval(args) -> int:
    if args.conditions.strip().lower() == "all":
        conds = list(evaluate.CONDITIONS)
    else:
        conds = [evaluate.condition(c.strip())
                 for c in args.conditions.split(",") if c.strip()]
    snrs = [math.inf if s.strip().lower() == "inf" else float(s)
            for s in args.snrs.split(",") if s.strip()]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    reports = []
    for cond in conds:
        for snr in snrs:
            reports.append(evaluate.run_condition(
                cond, snr, args.n_trials, methods,
                seed=args.seed, band=args.band, n_select=args.n_select,
                irm0=args.irm0, xi_n=args.xi, perturb=args.perturb,
                mask_dir=args.mask_dir, export_dir=args.export_spx))
    report = evaluate.merge_reports(reports)
    evaluate.write_report(report, args.out)
    if not args.no_figure:
        plots.save_accuracy_figure(report.rows, Path(args.out) / "accuracy.png")
    for row in report.rows:
        print(f"{row.condition_id} snr={row.snr_db:g} {row.method}: "
              f"{row.accuracy:.3f} ({row.n_trials} trials)")
    return 0


def cmd_export_spec(args) -> int:
    signal = fileio.read_wav(args.input)
    cfg = StftConfig(sample_rate=signal.sample_rate, fft_size=args.fft_size)
    spec = stft(signal, cfg)
    logmag, degenerate = log_magnitude(spec, channel=args.channel)
    if degenerate:
        print("warning: constant-magnitude input, map is all zeros",
              file=sys.stderr)
    fileio.write_spx(args.out, logmag.astype(np.complex128)[:, :, None])
    print(args.out)
    return 0


def _write_sidecar(out_path, payload: dict) -> None:
    with open(Path(out_path).with_suffix(".json"), "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (fileio.FormatError, ValueError, FileNotFoundError, OSError,
            json.JSONDecodeError) as exc:
        print(f"dpd-doa: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
