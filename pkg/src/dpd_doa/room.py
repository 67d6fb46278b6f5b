"""Image-method room simulation, diffuse noise, and scene rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import butter, fftconvolve, lfilter

from .doa import SPEED_OF_SOUND, ArrayGeometry
from .stft import TimeSignal

# Fractional delays use a Hann-windowed sinc of 2 * KERNEL_HALF + 1 taps.
# The half-width equals the 1 ms direct-path window at 16 kHz, so the
# direct impulse is fully covered by the default split.
KERNEL_HALF = 16
RIR_LENGTH_FACTOR = 1.2
# Reflections are high-passed: all-positive image amplitudes otherwise sum
# coherently at DC and inflate the decay tail (walls do not reflect DC).
REFLECTION_HIGHPASS_HZ = 100.0
DIRECT_WINDOW_MS = 1.0
N_DIFFUSE_PLANE_WAVES = 256
_MAX_GEOMETRY_RESAMPLES = 100


@dataclass(frozen=True)
class RoomConfig:
    """Shoebox room with a uniform Sabine-derived wall reflection coefficient.

    t60 == 0 is the anechoic limit (absorption forced to 1, no images).
    """

    dims: tuple[float, float, float]
    t60: float
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError("room dims must be three positive lengths")
        if self.t60 < 0:
            raise ValueError("t60 must be non-negative")
        object.__setattr__(self, "dims", dims)
        self.reflection_coefficient  # reject t60/room combos with absorption >= 1

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dims
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dims
        return 2.0 * (lx * ly + lx * lz + ly * lz)

    @property
    def absorption(self) -> float:
        """Sabine absorption coefficient for the configured t60."""
        if self.t60 == 0:
            return 1.0
        sabine = 24.0 * math.log(10.0) / self.speed_of_sound
        alpha = sabine * self.volume / (self.surface * self.t60)
        if alpha >= 1.0:
            raise ValueError(
                f"t60={self.t60}s incompatible with room (Sabine absorption "
                f"{alpha:.3f} >= 1)"
            )
        return alpha

    @property
    def reflection_coefficient(self) -> float:
        return math.sqrt(1.0 - self.absorption)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > 0.0) and np.all(p < np.asarray(self.dims)))


@dataclass(frozen=True)
class ArrayPose:
    """Array placement: world-space center plus the local geometry."""

    center: tuple[float, float, float]
    geometry: ArrayGeometry

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def mic_positions(self) -> np.ndarray:
        return np.asarray(self.center) + self.geometry.positions


@dataclass(frozen=True)
class DirectionalNoise:
    """Point noise source; distance None means the speaker's distance."""

    doa: float
    distance: float | None = None


@dataclass(frozen=True)
class DiffuseNoise:
    """Spherically isotropic noise field."""


@dataclass(frozen=True)
class SceneConfig:
    """One reverberant noisy scene: room, array, speaker, noise, SNR, seed."""

    room: RoomConfig
    array: ArrayPose
    speaker_doa: float
    speaker_distance: float
    noise_kind: DirectionalNoise | DiffuseNoise
    snr_db: float
    rng_seed: int

    def __post_init__(self):
        if not -90.0 <= self.speaker_doa <= 90.0:
            raise ValueError("speaker_doa must lie in [-90, 90] degrees")
        if self.speaker_distance <= 0:
            raise ValueError("speaker_distance must be positive")
        for mic in self.array.mic_positions():
            if not self.room.contains(mic):
                raise ValueError(f"microphone at {mic} outside room {self.room.dims}")
        if not self.room.contains(self.speaker_position()):
            raise ValueError("speaker outside room")
        if isinstance(self.noise_kind, DirectionalNoise):
            if not self.room.contains(self.noise_position()):
                raise ValueError("noise source outside room")

    def speaker_position(self) -> np.ndarray:
        u = self.array.geometry.source_direction(self.speaker_doa)
        return np.asarray(self.array.center) + self.speaker_distance * u

    def noise_position(self) -> np.ndarray:
        if not isinstance(self.noise_kind, DirectionalNoise):
            raise ValueError("diffuse noise has no point position")
        dist = self.noise_kind.distance
        if dist is None:
            dist = self.speaker_distance
        u = self.array.geometry.source_direction(self.noise_kind.doa)
        return np.asarray(self.array.center) + dist * u


@dataclass(frozen=True)
class Rir:
    """Room impulse response for one source-microphone pair."""

    taps: np.ndarray
    sample_rate: float
    direct_arrival_index: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 1 or not np.all(np.isfinite(taps)):
            raise ValueError("taps must be a finite 1-D sequence")
        object.__setattr__(self, "taps", taps)

    @property
    def energy(self) -> float:
        return float(np.sum(self.taps**2))


@dataclass(frozen=True)
class SceneComponents:
    """Separately rendered direct, reverberant, and noise signals plus their sum."""

    direct: TimeSignal
    reverb: TimeSignal
    noise: TimeSignal
    mixture: TimeSignal


def _frac_delay_kernel(frac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Windowed-sinc taps for fractional positions, as (offsets, (n, taps))."""
    k = np.arange(-KERNEL_HALF, KERNEL_HALF + 1)
    x = k[None, :] - frac[:, None]
    half = KERNEL_HALF + 0.5
    window = 0.5 + 0.5 * np.cos(np.pi * x / half)
    return k, np.sinc(x) * window


def _scatter_taps(taps: np.ndarray, tau: np.ndarray, amps: np.ndarray) -> None:
    """Accumulate amplitude-scaled fractional impulses into the tap buffer."""
    n_taps = taps.shape[0]
    centers = np.round(tau).astype(np.int64)
    k, kernels = _frac_delay_kernel(tau - centers)
    idx = centers[:, None] + k[None, :]
    vals = amps[:, None] * kernels
    valid = (idx >= 0) & (idx < n_taps)
    taps += np.bincount(idx[valid], weights=vals[valid], minlength=n_taps)


def _axis_images(source_coord: float, length: float, n_order: int):
    """Image coordinates and reflection counts along one axis."""
    r = np.arange(-n_order, n_order + 1)
    coords = np.concatenate([source_coord + 2.0 * length * r,
                             -source_coord + 2.0 * length * r])
    counts = np.concatenate([2 * np.abs(r), np.abs(r - 1) + np.abs(r)])
    return coords, counts.astype(np.int16)


def _image_rirs(room: RoomConfig, source, mics, fs: float) -> list[Rir]:
    """Image-method RIRs from one source to several microphones.

    Shares the image lattice across microphones; fractional delays are
    realized with the Hann-windowed sinc kernel.
    """
    source = np.asarray(source, dtype=float)
    mics = np.atleast_2d(np.asarray(mics, dtype=float))
    if not room.contains(source):
        raise ValueError(f"source {source} outside room {room.dims}")
    for mic in mics:
        if not room.contains(mic):
            raise ValueError(f"microphone {mic} outside room {room.dims}")
    c = room.speed_of_sound
    beta = room.reflection_coefficient
    direct_dist = np.linalg.norm(mics - source, axis=1)
    min_taps = int(np.ceil(direct_dist.max() / c * fs)) + 2 * KERNEL_HALF + 2
    if room.t60 == 0:
        n_taps = min_taps
    else:
        n_taps = max(int(round(RIR_LENGTH_FACTOR * room.t60 * fs)), min_taps)
    max_dist = (n_taps + KERNEL_HALF) / fs * c

    buffers = np.zeros((mics.shape[0], n_taps))
    for m in range(mics.shape[0]):
        d = max(direct_dist[m], 1e-2)
        _scatter_taps(buffers[m], np.array([d / c * fs]),
                      np.array([1.0 / (4.0 * np.pi * d)]))
    if beta > 0.0:
        reflected = np.zeros_like(buffers)
        orders = [int(np.ceil((max_dist + room.dims[i]) / (2.0 * room.dims[i])))
                  for i in range(3)]
        cx, ex = _axis_images(source[0], room.dims[0], orders[0])
        cy, ey = _axis_images(source[1], room.dims[1], orders[1])
        cz, ez = _axis_images(source[2], room.dims[2], orders[2])
        log_beta = math.log(beta)
        chunk = max(1, int(2e5) // (cy.size * cz.size) + 1)
        for lo in range(0, cx.size, chunk):
            hi = min(lo + chunk, cx.size)
            expo = (ex[lo:hi, None, None].astype(np.int32)
                    + ey[None, :, None] + ez[None, None, :]).ravel()
            gains = np.exp(expo * log_beta)
            xs = cx[lo:hi, None, None]
            ys = cy[None, :, None]
            zs = cz[None, None, :]
            for m, mic in enumerate(mics):
                d2 = ((xs - mic[0]) ** 2 + (ys - mic[1]) ** 2
                      + (zs - mic[2]) ** 2).ravel()
                keep = (d2 <= max_dist * max_dist) & (expo > 0)
                if not np.any(keep):
                    continue
                d = np.maximum(np.sqrt(d2[keep]), 1e-2)
                amps = gains[keep] / (4.0 * np.pi * d)
                _scatter_taps(reflected[m], d / c * fs, amps)
        hp_b, hp_a = butter(2, REFLECTION_HIGHPASS_HZ / (fs / 2.0), "highpass")
        buffers += lfilter(hp_b, hp_a, reflected, axis=1)

    return [
        Rir(taps=buffers[m], sample_rate=fs,
            direct_arrival_index=int(round(direct_dist[m] / c * fs)))
        for m in range(mics.shape[0])
    ]


def simulate_rir(room: RoomConfig, source, mic, fs: float) -> Rir:
    """Image-method impulse response between one source and one microphone.

    The wall reflection coefficient follows from the room's t60 via
    Sabine's formula; the response is RIR_LENGTH_FACTOR * t60 long.
    """
    return _image_rirs(room, source, np.atleast_2d(mic), fs)[0]


def split_rir(rir: Rir, direct_window_ms: float = DIRECT_WINDOW_MS
              ) -> tuple[Rir, Rir]:
    """Partition into direct and reverberant parts at arrival + window.

    Both parts keep the original length (zero-padded) so they convolve in
    alignment and sum tap-for-tap to the original.
    """
    if direct_window_ms <= 0:
        raise ValueError("direct_window_ms must be positive")
    cut = rir.direct_arrival_index + int(round(direct_window_ms * rir.sample_rate / 1000.0))
    direct = np.zeros_like(rir.taps)
    upto = min(cut + 1, rir.taps.shape[0])
    direct[:upto] = rir.taps[:upto]
    reverb = rir.taps - direct
    return (
        Rir(taps=direct, sample_rate=rir.sample_rate,
            direct_arrival_index=rir.direct_arrival_index),
        Rir(taps=reverb, sample_rate=rir.sample_rate,
            direct_arrival_index=rir.direct_arrival_index),
    )


def diffuse_noise(mic_positions, duration: float, fs: float, seed: int,
                  c: float = SPEED_OF_SOUND,
                  n_plane_waves: int = N_DIFFUSE_PLANE_WAVES) -> TimeSignal:
    """Spherically isotropic noise at the given microphone positions.

    Superposes independent white plane waves from directions uniformly
    sampled on the sphere; pairwise coherence approaches
    sin(2 pi f d / c) / (2 pi f d / c). Durations of a few seconds or more
    are recommended when estimating coherence from a single realization.
    """
    positions = np.atleast_2d(np.asarray(mic_positions, dtype=float))
    if positions.shape[0] < 2:
        raise ValueError("need at least 2 microphones")
    n = int(round(duration * fs))
    if n < 1:
        raise ValueError("duration too short")
    nfft = 1 << max(int(np.ceil(np.log2(n))), 1)
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, n_plane_waves)
    phi = rng.uniform(0.0, 2.0 * np.pi, n_plane_waves)
    s = np.sqrt(1.0 - z**2)
    dirs = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    rel = positions[1:] - positions[0]  # mic 0 is the phase reference
    omega = 2.0 * np.pi * np.fft.rfftfreq(nfft, d=1.0 / fs)
    spectra = np.zeros((positions.shape[0], omega.size), dtype=np.complex128)
    for w in range(n_plane_waves):
        src = np.fft.rfft(rng.standard_normal(nfft))
        spectra[0] += src
        delays = -(rel @ dirs[w]) / c
        spectra[1:] += src[None, :] * np.exp(-1j * omega[None, :] * delays[:, None])
    out = np.fft.irfft(spectra, n=nfft, axis=1) / np.sqrt(n_plane_waves)
    return TimeSignal(data=out[:, :n].T, sample_rate=fs)


def mix_at_snr(speech_ref: TimeSignal, noise: TimeSignal, snr_db: float) -> float:
    """Scale factor for the noise so that mic-1 SNR equals snr_db.

    The speech reference is direct + reverb; an infinite SNR disables the
    noise entirely (returns 0).
    """
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    p_noise = float(np.mean(noise.channel(0) ** 2))
    if p_noise <= 0.0:
        raise ValueError("noise has zero energy")
    p_speech = float(np.mean(speech_ref.channel(0) ** 2))
    return math.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))


def _convolve_channels(mono: np.ndarray, rirs: list[Rir], taps_attr,
                       n_out: int) -> np.ndarray:
    out = np.empty((n_out, len(rirs)))
    for m, rir in enumerate(rirs):
        out[:, m] = fftconvolve(mono, taps_attr(rir))[:n_out]
    return out


def _render_direct(mono: np.ndarray, mics: np.ndarray, source: np.ndarray,
                   c: float, fs: float, n_out: int) -> np.ndarray:
    """Direct-path rendering with exact frequency-domain fractional delays.

    A sampled interpolation kernel cannot represent inter-mic phase near
    Nyquist; applying exp(-j w d/c) on a zero-padded spectrum keeps the
    direct path phase-exact at every analysis frequency.
    """
    dists = np.maximum(np.linalg.norm(mics - source, axis=1), 1e-2)
    pad = max(4096, mono.shape[0] // 8) + int(np.ceil(dists.max() / c * fs))
    nfft = 1 << int(np.ceil(np.log2(mono.shape[0] + pad)))
    spec = np.fft.rfft(mono, nfft)
    omega = 2.0 * np.pi * np.fft.rfftfreq(nfft, d=1.0 / fs)
    out = np.empty((n_out, mics.shape[0]))
    for m, d in enumerate(dists):
        shifted = np.fft.irfft(spec * np.exp(-1j * omega * d / c), nfft)
        out[:, m] = shifted[:n_out] / (4.0 * np.pi * d)
    return out


def render_scene(scene: SceneConfig, speech: TimeSignal,
                 noise_src: TimeSignal | None = None) -> SceneComponents:
    """Render direct, reverberant, and noise components and their mixture.

    The direct path applies exact per-mic fractional delays and spherical
    gains; the reverberant part convolves the speech with the reverb
    portion of the split speaker RIRs. Directional noise is convolved with
    its full RIR (diffuse noise comes from the isotropic generator) and
    scaled to the scene SNR at microphone 1. The mixture is the
    sample-exact sum of the three components.

    Parameters
    ----------
    scene : SceneConfig
        Scene to realize; rng_seed drives the diffuse-noise realization.
    speech : TimeSignal
        Mono source signal; its length sets the output length.
    noise_src : TimeSignal, optional
        Mono noise signal, required for directional noise at finite SNR.
        Tiled if shorter than the speech.
    """
    if speech.n_channels != 1:
        raise ValueError("speech must be mono")
    fs = speech.sample_rate
    n = speech.n_samples
    mics = scene.array.mic_positions()
    n_mics = mics.shape[0]

    speaker_pos = scene.speaker_position()
    speaker_rirs = _image_rirs(scene.room, speaker_pos, mics, fs)
    splits = [split_rir(r) for r in speaker_rirs]
    mono = speech.channel(0)
    direct = _render_direct(mono, mics, speaker_pos, scene.room.speed_of_sound,
                            fs, n)
    reverb = _convolve_channels(mono, [s[1] for s in splits], lambda r: r.taps, n)

    noise_free = math.isinf(scene.snr_db) and scene.snr_db > 0
    if noise_free:
        noise = np.zeros((n, n_mics))
    elif isinstance(scene.noise_kind, DirectionalNoise):
        if noise_src is None:
            raise ValueError("directional noise requires a noise source signal")
        if noise_src.n_channels != 1:
            raise ValueError("noise source must be mono")
        src = np.resize(noise_src.channel(0), n)
        noise_rirs = _image_rirs(scene.room, scene.noise_position(), mics, fs)
        noise = _convolve_channels(src, noise_rirs, lambda r: r.taps, n)
    else:
        noise = diffuse_noise(mics, n / fs, fs, seed=scene.rng_seed).data

    if not noise_free:
        speech_ref = TimeSignal(data=direct + reverb, sample_rate=fs)
        alpha = mix_at_snr(speech_ref, TimeSignal(data=noise, sample_rate=fs),
                           scene.snr_db)
        noise = noise * alpha

    return SceneComponents(
        direct=TimeSignal(data=direct, sample_rate=fs),
        reverb=TimeSignal(data=reverb, sample_rate=fs),
        noise=TimeSignal(data=noise, sample_rate=fs),
        mixture=TimeSignal(data=direct + reverb + noise, sample_rate=fs),
    )


def perturb_scene(scene: SceneConfig, fraction: float = 0.10,
                  seed: int = 0) -> SceneConfig:
    """Scale room dims, array center, and source distance by random factors.

    Each scalar gets an independent uniform factor in [1 - fraction,
    1 + fraction]; the DOA is unchanged. Draws are repeated (up to 100
    times) until the perturbed scene satisfies the geometry invariants.
    """
    if not 0.0 <= fraction < 0.5:
        raise ValueError("fraction must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_GEOMETRY_RESAMPLES):
        f = rng.uniform(1.0 - fraction, 1.0 + fraction, size=7)
        try:
            return replace(
                scene,
                room=replace(scene.room, dims=tuple(
                    d * f[i] for i, d in enumerate(scene.room.dims))),
                array=replace(scene.array, center=tuple(
                    c * f[3 + i] for i, c in enumerate(scene.array.center))),
                speaker_distance=scene.speaker_distance * f[6],
            )
        except ValueError:
            continue
    raise ValueError("could not satisfy scene geometry after 100 resamples")


def scene_to_dict(scene: SceneConfig) -> dict:
    """JSON-ready dict mirroring SceneConfig field names."""
    geom = scene.array.geometry
    if geom.kind == "ula":
        gd = {"kind": "ula", "spacing": float(geom.positions[1, 0] - geom.positions[0, 0]),
              "n_mics": geom.n_mics}
    elif geom.kind == "uca":
        gd = {"kind": "uca", "radius": float(np.linalg.norm(geom.positions[0])),
              "n_mics": geom.n_mics}
    else:
        gd = {"kind": "custom", "positions": geom.positions.tolist()}
    if isinstance(scene.noise_kind, DirectionalNoise):
        nd = {"kind": "directional", "doa": scene.noise_kind.doa}
        if scene.noise_kind.distance is not None:
            nd["distance"] = scene.noise_kind.distance
    else:
        nd = {"kind": "diffuse"}
    snr = "inf" if math.isinf(scene.snr_db) else scene.snr_db
    return {
        "room": {"dims": list(scene.room.dims), "t60": scene.room.t60,
                 "speed_of_sound": scene.room.speed_of_sound},
        "array": {"center": list(scene.array.center), "geometry": gd},
        "speaker_doa": scene.speaker_doa,
        "speaker_distance": scene.speaker_distance,
        "noise_kind": nd,
        "snr_db": snr,
        "rng_seed": scene.rng_seed,
    }


def scene_from_dict(doc: dict) -> SceneConfig:
    """Parse a scene description; inverse of :func:`scene_to_dict`."""
    try:
        gd = doc["array"]["geometry"]
        if gd["kind"] == "ula":
            geom = ArrayGeometry.ula(spacing=gd.get("spacing", 0.035),
                                     n_mics=gd.get("n_mics", 4))
        elif gd["kind"] == "uca":
            geom = ArrayGeometry.uca(radius=gd.get("radius", 0.035),
                                     n_mics=gd.get("n_mics", 4))
        else:
            geom = ArrayGeometry(positions=np.asarray(gd["positions"]))
        nd = doc["noise_kind"]
        if nd["kind"] == "directional":
            noise = DirectionalNoise(doa=float(nd["doa"]),
                                     distance=nd.get("distance"))
        elif nd["kind"] == "diffuse":
            noise = DiffuseNoise()
        else:
            raise ValueError(f"unknown noise kind {nd['kind']!r}")
        snr = doc["snr_db"]
        snr_db = math.inf if snr in ("inf", None) else float(snr)
        return SceneConfig(
            room=RoomConfig(dims=tuple(doc["room"]["dims"]),
                            t60=float(doc["room"]["t60"]),
                            speed_of_sound=float(doc["room"].get(
                                "speed_of_sound", SPEED_OF_SOUND))),
            array=ArrayPose(center=tuple(doc["array"]["center"]), geometry=geom),
            speaker_doa=float(doc["speaker_doa"]),
            speaker_distance=float(doc["speaker_distance"]),
            noise_kind=noise,
            snr_db=snr_db,
            rng_seed=int(doc.get("rng_seed", 0)),
        )
    except KeyError as exc:
        raise ValueError(f"scene document missing field {exc}") from exc
