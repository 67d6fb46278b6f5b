"""Array geometry, steering vectors, and masked SRP-PHAT / MUSIC spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masking import BinSet
from .stft import Spectrogram

SPEED_OF_SOUND = 343.0

# Per-bin snapshots with total power below this are skipped by SRP-PHAT.
POWER_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone positions in array-local coordinates, centroid at origin.

    The incident-angle convention depends on the kind: a ULA (mics along
    the local x axis) measures angles from broadside (+y), a UCA measures
    azimuth from the +x axis. Both live in the horizontal plane.
    """

    positions: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if pos.shape[1] != 3:
            raise ValueError("positions must be (M, 3)")
        object.__setattr__(self, "positions", pos - pos.mean(axis=0))

    @classmethod
    def ula(cls, spacing: float = 0.035, n_mics: int = 4) -> "ArrayGeometry":
        """Uniform linear array along local x, broadside at 0 degrees."""
        x = (np.arange(n_mics) - (n_mics - 1) / 2.0) * spacing
        pos = np.stack([x, np.zeros(n_mics), np.zeros(n_mics)], axis=1)
        return cls(positions=pos, kind="ula")

    @classmethod
    def uca(cls, radius: float = 0.035, n_mics: int = 4) -> "ArrayGeometry":
        """Uniform circular array in the horizontal plane."""
        phi = 2.0 * np.pi * np.arange(n_mics) / n_mics
        pos = radius * np.stack([np.cos(phi), np.sin(phi), np.zeros(n_mics)], axis=1)
        return cls(positions=pos, kind="uca")

    @property
    def n_mics(self) -> int:
        return self.positions.shape[0]

    def source_direction(self, theta_deg) -> np.ndarray:
        """Unit vector(s) from the array toward sources at the given angle(s)."""
        th = np.deg2rad(np.asarray(theta_deg, dtype=np.float64))
        if self.kind == "ula":
            comps = [np.sin(th), np.cos(th), np.zeros_like(th)]
        else:
            comps = [np.cos(th), np.sin(th), np.zeros_like(th)]
        return np.stack(comps, axis=-1)


@dataclass(frozen=True)
class SteeringVector:
    """Unit-modulus array response for one frequency and incident angle."""

    entries: np.ndarray
    frequency: float
    angle: float


@dataclass(frozen=True)
class AngleGrid:
    """Candidate angles in degrees, strictly increasing."""

    angles: np.ndarray = field(
        default_factory=lambda: np.arange(-90.0, 91.0, 1.0)
    )

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=np.float64)
        if angles.ndim != 1 or angles.size == 0 or np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be non-empty and strictly increasing")
        object.__setattr__(self, "angles", angles)

    def __len__(self) -> int:
        return self.angles.size


@dataclass(frozen=True)
class SpatialSpectrum:
    """Steered power over an angle grid."""

    grid: AngleGrid
    power: np.ndarray
    method: str

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        if power.shape != (len(self.grid),):
            raise ValueError("power length must match the grid")
        if not np.all(np.isfinite(power)) or np.any(power < 0):
            raise ValueError("power must be finite and non-negative")
        object.__setattr__(self, "power", power)


@dataclass(frozen=True)
class FreqCovariance:
    """Per-frequency spatial covariance averaged over selected snapshots."""

    f_bin: int
    matrix: np.ndarray
    n_snapshots: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        if np.abs(mat - mat.conj().T).max() > 1e-10 * max(np.abs(mat).max(), 1.0):
            raise ValueError("matrix must be Hermitian")
        if np.linalg.eigvalsh(mat).min() < -1e-10 * max(np.abs(mat).max(), 1.0):
            raise ValueError("matrix must be positive semidefinite")
        object.__setattr__(self, "matrix", mat)


def _delays(geom: ArrayGeometry, theta_deg, c: float) -> np.ndarray:
    """Arrival delay of each mic relative to the centroid, in seconds.

    Mics projected farther along the source direction receive earlier,
    hence the negative sign. Scalar angle gives (M,), a vector of angles
    gives (M, n_angles).
    """
    u = geom.source_direction(theta_deg)
    return -(geom.positions @ np.atleast_2d(u).T).squeeze() / c


def steering(geom: ArrayGeometry, f: float, theta_deg: float,
             c: float = SPEED_OF_SOUND) -> SteeringVector:
    """Far-field plane-wave steering vector exp(-j 2 pi f tau_m)."""
    if f <= 0:
        raise ValueError("frequency must be positive")
    entries = np.exp(-2j * np.pi * f * _delays(geom, theta_deg, c))
    return SteeringVector(entries=entries, frequency=f, angle=theta_deg)


def steering_matrix(geom: ArrayGeometry, f: float, grid: AngleGrid,
                    c: float = SPEED_OF_SOUND) -> np.ndarray:
    """(M, n_angles) steering vectors for every grid angle at one frequency."""
    taus = -(geom.positions @ geom.source_direction(grid.angles).T) / c
    return np.exp(-2j * np.pi * f * taus)


def _snapshots_by_bin(spec: Spectrogram, bins: BinSet):
    """Yield (f_bin, (n_t, M) snapshot matrix) for each frequency in the set.

    The Nyquist bin is omitted: a real signal's one-sided coefficient
    there is real-valued, so it carries no inter-channel phase.
    """
    nyquist = spec.fft_size // 2
    order = np.lexsort((bins.frames, bins.bins))
    f_sorted = bins.bins[order]
    t_sorted = bins.frames[order]
    uniq, starts = np.unique(f_sorted, return_index=True)
    bounds = np.append(starts, f_sorted.size)
    for i, f in enumerate(uniq):
        if f == nyquist:
            continue
        t_idx = t_sorted[bounds[i] : bounds[i + 1]]
        yield int(f), spec.values[t_idx, f, :]


def srp_phat(spec: Spectrogram, bins: BinSet, geom: ArrayGeometry,
             grid: AngleGrid | None = None,
             c: float = SPEED_OF_SOUND) -> SpatialSpectrum:
    """Steered response power with phase-transform weighting.

    Each selected bin contributes |x^H g|^2 / ||x||^2, which is invariant
    to per-bin complex rescaling of the snapshot. Bins with total power
    below POWER_FLOOR are skipped.

    Parameters
    ----------
    spec : Spectrogram
        Multichannel mixture spectrogram; channel count must match geom.
    bins : BinSet
        Time-frequency bins entering the sum (the DPD set, or all band
        bins for the unmasked baseline).
    """
    if spec.n_channels != geom.n_mics:
        raise ValueError("spectrogram channels do not match array size")
    if len(bins) == 0:
        raise ValueError("no bins passed DPD test")
    grid = grid or AngleGrid()
    power = np.zeros(len(grid))
    for f, snaps in _snapshots_by_bin(spec, bins):
        norms = np.sum(np.abs(snaps) ** 2, axis=1)
        keep = norms > POWER_FLOOR
        if not np.any(keep):
            continue
        g = steering_matrix(geom, spec.bin_freq(f), grid, c)
        proj = snaps[keep].conj() @ g
        power += np.sum(np.abs(proj) ** 2 / norms[keep, None], axis=0)
    return SpatialSpectrum(grid=grid, power=power, method="srp-phat")


def covariance(spec: Spectrogram, bins: BinSet, f: int) -> FreqCovariance:
    """Sample-average covariance of the selected snapshots at bin f."""
    t_idx = bins.frames[bins.bins == f]
    if t_idx.size == 0:
        raise ValueError(f"frequency excluded: no selected bins at f={f}")
    snaps = spec.values[t_idx, f, :]
    mat = (snaps.T @ snaps.conj()) / t_idx.size
    return FreqCovariance(f_bin=f, matrix=mat, n_snapshots=t_idx.size)


def music(spec: Spectrogram, bins: BinSet, geom: ArrayGeometry,
          grid: AngleGrid | None = None, c: float = SPEED_OF_SOUND,
          eps: float = 1e-10) -> SpatialSpectrum:
    """Single-source MUSIC over the frequencies represented in the bin set.

    For every frequency with at least M selected snapshots, the M-1
    eigenvectors of the smallest covariance eigenvalues span the noise
    subspace; the spectrum accumulates 1 / (||U_n^H g||^2 + eps).
    """
    if spec.n_channels != geom.n_mics:
        raise ValueError("spectrogram channels do not match array size")
    if len(bins) == 0:
        raise ValueError("no bins passed DPD test")
    grid = grid or AngleGrid()
    m = geom.n_mics
    power = np.zeros(len(grid))
    n_used = 0
    for f, snaps in _snapshots_by_bin(spec, bins):
        if snaps.shape[0] < m:
            continue
        r = (snaps.T @ snaps.conj()) / snaps.shape[0]
        _, vecs = np.linalg.eigh(r)  # ascending eigenvalues
        noise_sub = vecs[:, : m - 1]
        g = steering_matrix(geom, spec.bin_freq(f), grid, c)
        power += 1.0 / (np.sum(np.abs(noise_sub.conj().T @ g) ** 2, axis=0) + eps)
        n_used += 1
    if n_used == 0:
        raise ValueError("insufficient snapshots for MUSIC")
    return SpatialSpectrum(grid=grid, power=power, method="music")


def pick_doa(spectrum: SpatialSpectrum) -> float:
    """Angle of the global maximum; ties break toward the smaller angle."""
    return float(spectrum.grid.angles[int(np.argmax(spectrum.power))])
