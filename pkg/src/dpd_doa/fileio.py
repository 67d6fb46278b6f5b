"""WAV, .spx spectrogram, .msk mask-pair, and CSV spectrum I/O.

All multi-byte binary fields are little-endian. The .spx and .msk layouts
are the data-plane contract with the mask trainer, so round-trips must be
bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .doa import SpatialSpectrum
from .masking import PROVENANCE_ESTIMATED, PROVENANCE_ORACLE, MaskPair
from .stft import TimeSignal

SPX_MAGIC = b"SPX1"
MSK_MAGIC = b"MSK1"


class FormatError(Exception):
    """Malformed or truncated data file."""


def read_wav(path) -> TimeSignal:
    """Read a PCM 16-bit or IEEE float-32 WAV into a float signal."""
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise FormatError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise FormatError(f"unsupported WAV sample format {data.dtype} in {path}")
    return TimeSignal(data=data, sample_rate=float(rate))


def write_wav(path, signal: TimeSignal, pcm16: bool = False) -> None:
    """Write a signal as float-32 WAV (or PCM 16-bit when requested)."""
    data = signal.data
    if pcm16:
        scaled = np.clip(np.round(data * 32768.0), -32768, 32767).astype("<i2")
    else:
        scaled = data.astype("<f4")
    if scaled.shape[1] == 1:
        scaled = scaled[:, 0]
    wavfile.write(path, int(signal.sample_rate), scaled)


def write_spx(path, values: np.ndarray) -> None:
    """Write an (L, K, M) complex tensor: SPX1 header + interleaved float-32.

    Planes are channel-major, rows t-major then f, each value stored as
    (re, im) float-32 pairs.
    """
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[:, :, None]
    if values.ndim != 3:
        raise ValueError("values must be (L, K, M)")
    length, bins, channels = values.shape
    planes = np.empty((channels, length, bins, 2), dtype="<f4")
    planes[..., 0] = values.real.transpose(2, 0, 1)
    planes[..., 1] = values.imag.transpose(2, 0, 1)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", SPX_MAGIC, length, bins, channels))
        fh.write(planes.tobytes())


def read_spx(path) -> np.ndarray:
    """Read an .spx file back into an (L, K, M) complex tensor."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != SPX_MAGIC:
        raise FormatError(f"{path}: not an SPX1 file")
    length, bins, channels = struct.unpack("<III", raw[4:16])
    expected = 16 + length * bins * channels * 8
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    planes = np.frombuffer(raw, dtype="<f4", offset=16)
    planes = planes.reshape(channels, length, bins, 2)
    values = planes[..., 0].astype(np.complex128)
    values += 1j * planes[..., 1]
    return values.transpose(1, 2, 0)


def write_msk(path, masks: MaskPair) -> None:
    """Write a mask pair: MSK1 header, provenance byte, two float-32 planes."""
    prov = 0 if masks.provenance == PROVENANCE_ORACLE else 1
    length, bins = masks.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIB", MSK_MAGIC, length, bins, prov))
        fh.write(masks.irm_s.astype("<f4").tobytes())
        fh.write(masks.irm_d.astype("<f4").tobytes())


def read_msk(path) -> MaskPair:
    """Read a .msk file back into a MaskPair."""
    raw = Path(path).read_bytes()
    if len(raw) < 13 or raw[:4] != MSK_MAGIC:
        raise FormatError(f"{path}: not an MSK1 file")
    length, bins, prov = struct.unpack("<IIB", raw[4:13])
    expected = 13 + 2 * length * bins * 4
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    if prov not in (0, 1):
        raise FormatError(f"{path}: unknown provenance byte {prov}")
    planes = np.frombuffer(raw, dtype="<f4", offset=13).reshape(2, length, bins)
    return MaskPair(
        irm_s=planes[0].astype(np.float64),
        irm_d=planes[1].astype(np.float64),
        provenance=PROVENANCE_ORACLE if prov == 0 else PROVENANCE_ESTIMATED,
    )


def write_spectrum_csv(path, spectrum: SpatialSpectrum) -> None:
    """Spatial spectrum as (angle_deg, power) rows for plotting."""
    with open(path, "w") as fh:
        fh.write("angle_deg,power\n")
        for angle, power in zip(spectrum.grid.angles, spectrum.power):
            fh.write(f"{angle:g},{float(power)!r}\n")
