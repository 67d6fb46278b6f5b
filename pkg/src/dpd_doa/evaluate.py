"""Evaluation protocol: room presets, test conditions, and accuracy runs."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .doa import AngleGrid, ArrayGeometry, music, pick_doa, srp_phat
from .masking import DpdParams, all_band_bins, oracle_masks, refine_dpd, select_bins
from .room import (
    ArrayPose,
    DiffuseNoise,
    DirectionalNoise,
    RoomConfig,
    SceneConfig,
    perturb_scene,
    render_scene,
)
from .stft import StftConfig, TimeSignal, band_bins, log_magnitude, stft

DOA_TOLERANCE_DEG = 5.0
DEFAULT_DURATION = 2.072
DEFAULT_BAND = (1000.0, 8000.0)
MIC_SPACING = 0.035

METHODS = (
    "srp_phat_all",
    "music_all",
    "srp_phat_masked",
    "music_masked",
    "srp_phat_masked_est",
    "music_masked_est",
)


@dataclass(frozen=True)
class RoomPreset:
    room: RoomConfig
    center: tuple[float, float, float]
    distance: float


@dataclass(frozen=True)
class Condition:
    """One test condition: array kind, room preset, speaker and noise DOAs."""

    id: str
    array: str
    room: int
    speaker_doa: float
    noise: DirectionalNoise | DiffuseNoise


CONDITIONS = (
    Condition("I", "ula", 1, 30.0, DirectionalNoise(doa=-30.0)),
    Condition("II", "ula", 1, 60.0, DirectionalNoise(doa=-30.0)),
    Condition("III", "ula", 2, 30.0, DirectionalNoise(doa=-30.0)),
    Condition("IV", "ula", 2, 30.0, DiffuseNoise()),
    Condition("V", "uca", 2, 30.0, DirectionalNoise(doa=-30.0)),
    Condition("VI", "uca", 2, 30.0, DiffuseNoise()),
)


def condition(cid: str) -> Condition:
    for cond in CONDITIONS:
        if cond.id == cid:
            return cond
    raise ValueError(f"unknown condition {cid!r} (expected I..VI)")


def room_presets() -> dict[int, RoomPreset]:
    """The two evaluation rooms: size, t60, array center, source distance."""
    return {
        1: RoomPreset(room=RoomConfig(dims=(7.32, 5.5, 3.0), t60=0.32),
                      center=(3.0, 2.1, 1.2), distance=3.0),
        2: RoomPreset(room=RoomConfig(dims=(5.9, 4.2, 3.3), t60=0.65),
                      center=(2.5, 1.8, 1.5), distance=2.0),
    }


def is_correct(est: float, truth: float) -> bool:
    """An estimate counts as correct within 5 degrees of the truth."""
    return abs(est - truth) <= DOA_TOLERANCE_DEG


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labels (platform-independent)."""
    tag = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2s(tag, digest_size=8).digest(), "little")


def pink_noise(duration: float, fs: float, seed: int, rms: float = 0.1) -> TimeSignal:
    """Seeded pink (1/f power) Gaussian noise, RMS-normalized."""
    n = int(round(duration * fs))
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spec[1:] /= np.sqrt(freqs[1:] / freqs[1])
    spec[0] = 0.0
    x = np.fft.irfft(spec, n=n)
    x *= rms / np.sqrt(np.mean(x**2))
    return TimeSignal(data=x, sample_rate=fs)


def speech_shaped_noise(duration: float = DEFAULT_DURATION, fs: float = 16000.0,
                        seed: int = 0, mod_hz: float = 4.0) -> TimeSignal:
    """Corpus-free speech stand-in: pink noise with 4 Hz amplitude modulation."""
    base = pink_noise(duration, fs, seed)
    t = np.arange(base.n_samples) / fs
    env = 0.1 + 0.45 * (1.0 - np.cos(2.0 * np.pi * mod_hz * t))
    x = base.channel(0) * env
    x *= 0.1 / np.sqrt(np.mean(x**2))
    return TimeSignal(data=x, sample_rate=fs)


def sample_training_scene(seed: int) -> SceneConfig:
    """Draw one training scene with every parameter uniform in its range.

    Room size in [6,8]x[4,6]x[2.8,3.6] m, source distance in [1.5, 2.5] m,
    t60 in [0.16, 2.1] s, SNR in [-5, 20] dB, DOA in [-90, 90] degrees.
    The array is a ULA at the room's horizontal center, 1.5 m high; draws
    violating the room geometry are resampled.
    """
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry.ula(MIC_SPACING)
    for _ in range(100):
        dims = (rng.uniform(6.0, 8.0), rng.uniform(4.0, 6.0), rng.uniform(2.8, 3.6))
        distance = rng.uniform(1.5, 2.5)
        t60 = rng.uniform(0.16, 2.1)
        snr_db = rng.uniform(-5.0, 20.0)
        doa = rng.uniform(-90.0, 90.0)
        if rng.uniform() < 0.5:
            noise = DirectionalNoise(doa=rng.uniform(-90.0, 90.0))
        else:
            noise = DiffuseNoise()
        try:
            return SceneConfig(
                room=RoomConfig(dims=dims, t60=t60),
                array=ArrayPose(center=(dims[0] / 2.0, dims[1] / 2.0, 1.5),
                                geometry=geom),
                speaker_doa=doa,
                speaker_distance=distance,
                noise_kind=noise,
                snr_db=snr_db,
                rng_seed=derive_seed(seed, "scene"),
            )
        except ValueError:
            continue
    raise ValueError("could not draw a geometrically valid training scene")


def scene_for_condition(cond: Condition, snr_db: float, rng_seed: int,
                        anechoic: bool = False) -> SceneConfig:
    """SceneConfig realizing one Table-3 condition at the given SNR."""
    preset = room_presets()[cond.room]
    room = preset.room
    if anechoic:
        room = RoomConfig(dims=room.dims, t60=0.0,
                          speed_of_sound=room.speed_of_sound)
    geom = ArrayGeometry.ula(MIC_SPACING) if cond.array == "ula" \
        else ArrayGeometry.uca(MIC_SPACING)
    return SceneConfig(
        room=room,
        array=ArrayPose(center=preset.center, geometry=geom),
        speaker_doa=cond.speaker_doa,
        speaker_distance=preset.distance,
        noise_kind=cond.noise,
        snr_db=snr_db,
        rng_seed=rng_seed,
    )


@dataclass(frozen=True)
class TrialResult:
    condition_id: str
    snr_db: float
    method: str
    true_doa: float
    est_doa: float
    correct: bool
    seed: int


@dataclass(frozen=True)
class ReportRow:
    condition_id: str
    snr_db: float
    method: str
    n_trials: int
    accuracy: float


@dataclass(frozen=True)
class AccuracyReport:
    rows: list[ReportRow]
    trials: list[TrialResult]


def _trial_key(cond: Condition, snr_db: float, trial: int) -> str:
    return f"{cond.id}_snr{snr_db:g}_trial{trial:04d}"


def _bin_sets_for(methods, spec, comps, cfg, params, mask_dir, key):
    """Resolve each requested method's bin set (all-band, oracle, estimated)."""
    sets = {}
    if any(m.endswith("_all") for m in methods):
        sets["all"] = all_band_bins(spec.n_frames, params.band)
    if any(m.endswith("_masked") for m in methods):
        masks = oracle_masks(comps, cfg, ref_channel=0, xi_n=params.xi_n)
        sets["masked"] = select_bins(refine_dpd(masks, params.irm0), params)
    if any(m.endswith("_masked_est") for m in methods):
        if mask_dir is None:
            raise ValueError("estimated-mask methods require mask_dir")
        path = Path(mask_dir) / f"{key}.msk"
        if not path.exists():
            raise FileNotFoundError(f"missing estimated mask file: {path}")
        est = fileio.read_msk(path)
        if est.shape != (spec.n_frames, spec.n_bins):
            raise ValueError(
                f"{path}: mask shape {est.shape} does not match "
                f"spectrogram ({spec.n_frames}, {spec.n_bins})")
        sets["estimated"] = select_bins(refine_dpd(est, params.irm0), params)
    return sets


def _method_bin_kind(method: str) -> str:
    if method.endswith("_masked_est"):
        return "estimated"
    if method.endswith("_masked"):
        return "masked"
    return "all"


def run_condition(cond: Condition, snr_db: float, n_trials: int,
                  methods: list[str] | tuple[str, ...],
                  speech_source=None, seed: int = 0,
                  cfg: StftConfig | None = None,
                  band: tuple[float, float] = DEFAULT_BAND,
                  n_select: int = 1000, irm0: float = 0.5, xi_n: float = 1e-4,
                  perturb: float = 0.10, anechoic: bool = False,
                  mask_dir=None, export_dir=None) -> AccuracyReport:
    """Run paired trials of one condition at one SNR and score each method.

    Every trial perturbs the nominal scene geometry, renders it once, and
    feeds the identical mixture to all requested methods, so comparisons
    are paired. Trial seeds derive from (seed, condition, snr, index) and
    make the whole report deterministic.

    Parameters
    ----------
    methods : sequence of str
        Subset of METHODS; *_masked use oracle masks computed per trial,
        *_masked_est read {trial_key}.msk from mask_dir.
    speech_source : callable, optional
        seed -> mono TimeSignal; defaults to the built-in speech-shaped
        noise generator.
    export_dir : path, optional
        When set, writes per-trial mixture WAV, log-magnitude .spx, and
        oracle .msk files (the trainer handoff).
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    cfg = cfg or StftConfig()
    if speech_source is None:
        speech_source = lambda s: speech_shaped_noise(fs=cfg.sample_rate, seed=s)
    band_sel = band_bins(cfg, band[0], band[1])
    params = DpdParams(band=band_sel, xi_n=xi_n, irm0=irm0, n_select=n_select)
    grid = AngleGrid()
    if export_dir is not None:
        Path(export_dir).mkdir(parents=True, exist_ok=True)

    def one_trial(trial: int) -> list[TrialResult]:
        tseed = derive_seed(seed, cond.id, snr_db, trial)
        key = _trial_key(cond, snr_db, trial)
        scene = scene_for_condition(cond, snr_db,
                                    rng_seed=derive_seed(tseed, "render"),
                                    anechoic=anechoic)
        if perturb > 0:
            scene = perturb_scene(scene, perturb, seed=derive_seed(tseed, "geom"))
        speech = speech_source(derive_seed(tseed, "speech"))
        noise_src = None
        if isinstance(cond.noise, DirectionalNoise) and not math.isinf(snr_db):
            noise_src = pink_noise(speech.duration, cfg.sample_rate,
                                   derive_seed(tseed, "noise"))
        comps = render_scene(scene, speech, noise_src)
        spec = stft(comps.mixture, cfg)
        if export_dir is not None:
            fileio.write_wav(Path(export_dir) / f"{key}.wav", comps.mixture)
            logmag, _ = log_magnitude(spec, channel=0)
            fileio.write_spx(Path(export_dir) / f"{key}.spx",
                             logmag.astype(np.complex128)[:, :, None])
            fileio.write_msk(Path(export_dir) / f"{key}.msk",
                             oracle_masks(comps, cfg, 0, params.xi_n))
        sets = _bin_sets_for(methods, spec, comps, cfg, params, mask_dir, key)
        results = []
        for method in methods:
            bins = sets[_method_bin_kind(method)]
            estimator = srp_phat if method.startswith("srp_phat") else music
            try:
                est = pick_doa(estimator(spec, bins, scene.array.geometry, grid))
            except ValueError:
                est = math.nan  # e.g. empty bin set or too few MUSIC snapshots
            results.append(TrialResult(
                condition_id=cond.id, snr_db=snr_db, method=method,
                true_doa=cond.speaker_doa, est_doa=est,
                correct=is_correct(est, cond.speaker_doa), seed=tseed))
        return results

    n_workers = int(os.environ.get("DPD_DOA_THREADS", "1") or "1")
    if n_workers > 1 and n_trials > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            per_trial = list(pool.map(one_trial, range(n_trials)))
    else:
        per_trial = [one_trial(t) for t in range(n_trials)]

    trials = [r for batch in per_trial for r in batch]
    rows = []
    for method in methods:
        scored = [t.correct for t in trials if t.method == method]
        accuracy = float(np.mean(scored)) if scored else 0.0
        rows.append(ReportRow(condition_id=cond.id, snr_db=snr_db,
                              method=method, n_trials=n_trials,
                              accuracy=accuracy))
    return AccuracyReport(rows=rows, trials=trials)


def merge_reports(reports) -> AccuracyReport:
    rows, trials = [], []
    for rep in reports:
        rows.extend(rep.rows)
        trials.extend(rep.trials)
    return AccuracyReport(rows=rows, trials=trials)


def write_report(report: AccuracyReport, out_dir) -> None:
    """Write report.csv, summary.json, and the per-trial trials.jsonl log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w") as fh:
        fh.write("condition,snr_db,method,n_trials,accuracy\n")
        for row in report.rows:
            fh.write(f"{row.condition_id},{row.snr_db:g},{row.method},"
                     f"{row.n_trials},{row.accuracy:.6f}\n")
    summary = [
        {"condition": r.condition_id, "snr_db": _jsonable(r.snr_db),
         "method": r.method, "n_trials": r.n_trials, "accuracy": r.accuracy}
        for r in report.rows
    ]
    with open(out / "summary.json", "w") as fh:
        json.dump({"rows": summary}, fh, indent=2)
        fh.write("\n")
    with open(out / "trials.jsonl", "w") as fh:
        for t in report.trials:
            fh.write(json.dumps({
                "condition": t.condition_id, "snr_db": _jsonable(t.snr_db),
                "method": t.method, "true_doa": t.true_doa,
                "est_doa": _jsonable(t.est_doa), "correct": t.correct,
                "seed": t.seed,
            }) + "\n")


def _jsonable(x: float):
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return None if math.isnan(x) else "inf"
    return x
