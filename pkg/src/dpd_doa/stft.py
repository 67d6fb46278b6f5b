"""Short-time Fourier analysis/synthesis and log-magnitude feature maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Floor applied to magnitudes before log so silent bins stay finite.
LOG_FLOOR = 1e-8


def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann window; exactly COLA at 75% overlap."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class StftConfig:
    """Analysis parameters: 512-point FFT, 128-sample hop, Hann window."""

    sample_rate: float = 16000.0
    fft_size: int = 512
    hop: int = 128
    window: str = "hann"

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.fft_size < 2 or (self.fft_size & (self.fft_size - 1)) != 0:
            raise ValueError("fft_size must be a power of two")
        if self.hop <= 0 or self.fft_size % self.hop != 0:
            raise ValueError("hop must divide fft_size")
        if self.window != "hann":
            raise ValueError(f"unsupported window: {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def bin_width(self) -> float:
        return self.sample_rate / self.fft_size

    def n_frames(self, n_samples: int) -> int:
        """Frame count for an n-sample signal: no padding, tail dropped."""
        if n_samples < self.fft_size:
            raise ValueError("signal too short")
        return (n_samples - self.fft_size) // self.hop + 1


@dataclass(frozen=True)
class TimeSignal:
    """Multichannel time-domain signal, samples shaped (n_samples, n_channels)."""

    data: np.ndarray
    sample_rate: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise ValueError("data must be 1-D or 2-D (samples, channels)")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, m: int) -> np.ndarray:
        return self.data[:, m]


@dataclass(frozen=True)
class Spectrogram:
    """Complex time-frequency tensor, values indexed (frame, bin, channel)."""

    values: np.ndarray
    sample_rate: float
    fft_size: int

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 3:
            raise ValueError("values must be 3-D (frames, bins, channels)")
        if not np.iscomplexobj(values):
            values = values.astype(np.complex128)
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrogram values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    def bin_freq(self, k: int) -> float:
        return k * self.sample_rate / self.fft_size

    def freqs(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate / self.fft_size


@dataclass(frozen=True)
class BandSelection:
    """Inclusive bin range whose center frequencies lie in [f_lo, f_hi]."""

    f_lo: float
    f_hi: float
    bin_lo: int
    bin_hi: int

    def __post_init__(self):
        if self.bin_lo > self.bin_hi:
            raise ValueError("bin_lo must not exceed bin_hi")

    @property
    def n_bins(self) -> int:
        return self.bin_hi - self.bin_lo + 1

    def bins(self) -> np.ndarray:
        return np.arange(self.bin_lo, self.bin_hi + 1)


def stft(signal: TimeSignal, cfg: StftConfig) -> Spectrogram:
    """Analyze a multichannel signal into one-sided spectra.

    Frames are hop-spaced with no padding; trailing samples short of a
    full frame are dropped, so L = (N - fft_size) // hop + 1.

    Parameters
    ----------
    signal : TimeSignal
        Input of at least fft_size samples.
    cfg : StftConfig
        Analysis parameters; the window is periodic Hann.

    Returns
    -------
    Spectrogram
        Complex values shaped (L, fft_size // 2 + 1, n_channels).
    """
    n = signal.n_samples
    if n < cfg.fft_size:
        raise ValueError("signal too short")
    win = hann_periodic(cfg.fft_size)
    # (L, n_channels, fft_size) frame view, then window + rfft per frame.
    frames = np.lib.stride_tricks.sliding_window_view(
        signal.data, cfg.fft_size, axis=0
    )[:: cfg.hop]
    values = np.fft.rfft(frames * win, axis=-1)
    return Spectrogram(
        values=values.transpose(0, 2, 1),
        sample_rate=signal.sample_rate,
        fft_size=cfg.fft_size,
    )


def istft(spec: Spectrogram, cfg: StftConfig) -> TimeSignal:
    """Weighted overlap-add synthesis inverting :func:`stft`.

    Interior samples (those with full window coverage) reconstruct the
    original signal to better than 1e-6 relative error; edge samples are
    compensated by the accumulated window energy where it is nonzero.
    """
    if spec.n_bins != cfg.n_bins:
        raise ValueError(
            f"spectrogram has {spec.n_bins} bins, config implies {cfg.n_bins}"
        )
    if spec.fft_size != cfg.fft_size:
        raise ValueError("spectrogram fft_size does not match config")
    win = hann_periodic(cfg.fft_size)
    length = (spec.n_frames - 1) * cfg.hop + cfg.fft_size
    out = np.zeros((length, spec.n_channels))
    norm = np.zeros(length)
    frames = np.fft.irfft(spec.values.transpose(0, 2, 1), n=cfg.fft_size, axis=-1)
    for t in range(spec.n_frames):
        sl = slice(t * cfg.hop, t * cfg.hop + cfg.fft_size)
        out[sl] += (frames[t] * win).T
        norm[sl] += win**2
    nz = norm > 1e-12
    out[nz] /= norm[nz, None]
    return TimeSignal(data=out, sample_rate=spec.sample_rate)


def log_magnitude(spec: Spectrogram, channel: int) -> tuple[np.ndarray, bool]:
    """Normalized log-magnitude map of one channel, shaped (L, n_bins - 1).

    The DC bin is dropped, magnitudes are floored at LOG_FLOOR before the
    log, and the map is min-max rescaled per utterance to [-1, 1].

    Returns
    -------
    (map, degenerate)
        ``degenerate`` flags an all-equal input (min == max), in which
        case the map is all zeros.
    """
    if channel >= spec.n_channels:
        raise ValueError(f"channel {channel} out of range (M={spec.n_channels})")
    mag = np.abs(spec.values[:, 1:, channel])
    logmag = np.log(np.maximum(mag, LOG_FLOOR))
    lo, hi = logmag.min(), logmag.max()
    if hi - lo < 1e-12:
        return np.zeros_like(logmag), True
    return 2.0 * (logmag - lo) / (hi - lo) - 1.0, False


def band_bins(cfg: StftConfig, f_lo: float, f_hi: float) -> BandSelection:
    """Bins of cfg whose center frequency k*fs/fft_size lies in [f_lo, f_hi]."""
    if not (0 <= f_lo < f_hi <= cfg.sample_rate / 2):
        raise ValueError("require 0 <= f_lo < f_hi <= fs/2")
    df = cfg.bin_width
    # Rounding guard keeps exact band edges (e.g. 1000 Hz at 31.25 Hz/bin) inclusive.
    bin_lo = max(int(np.ceil(f_lo / df - 1e-9)), 0)
    bin_hi = min(int(np.floor(f_hi / df + 1e-9)), cfg.n_bins - 1)
    if bin_lo > bin_hi:
        raise ValueError(f"no bin centers inside [{f_lo}, {f_hi}] Hz")
    return BandSelection(f_lo=f_lo, f_hi=f_hi, bin_lo=bin_lo, bin_hi=bin_hi)
