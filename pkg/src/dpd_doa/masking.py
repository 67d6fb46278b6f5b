"""Ideal-ratio-mask targets, dual-mask refinement, and direct-path bin selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stft import BandSelection, StftConfig, stft

PROVENANCE_ORACLE = "oracle"
PROVENANCE_ESTIMATED = "estimated"


@dataclass(frozen=True)
class DpdParams:
    """Refinement and selection parameters: regularizer, speech gate, top-N, band."""

    band: BandSelection
    xi_n: float = 1e-4
    irm0: float = 0.5
    n_select: int = 1000

    def __post_init__(self):
        if self.xi_n <= 0:
            raise ValueError("xi_n must be positive")
        if not 0.0 <= self.irm0 <= 1.0:
            raise ValueError("irm0 must lie in [0, 1]")
        if self.n_select < 1:
            raise ValueError("n_select must be at least 1")


@dataclass(frozen=True)
class MaskPair:
    """Speech mask and direct-path mask, both (L, K) maps in [0, 1]."""

    irm_s: np.ndarray
    irm_d: np.ndarray
    provenance: str = PROVENANCE_ORACLE

    def __post_init__(self):
        irm_s = np.asarray(self.irm_s, dtype=np.float64)
        irm_d = np.asarray(self.irm_d, dtype=np.float64)
        if irm_s.shape != irm_d.shape or irm_s.ndim != 2:
            raise ValueError("masks must be 2-D maps of identical shape")
        for name, m in (("irm_s", irm_s), ("irm_d", irm_d)):
            if m.min() < 0.0 or m.max() > 1.0:
                raise ValueError(f"{name} values must lie in [0, 1]")
        if self.provenance not in (PROVENANCE_ORACLE, PROVENANCE_ESTIMATED):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == PROVENANCE_ORACLE and np.any(irm_d > irm_s + 1e-12):
            raise ValueError("oracle masks require irm_d <= irm_s")
        object.__setattr__(self, "irm_s", irm_s)
        object.__setattr__(self, "irm_d", irm_d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.irm_s.shape


@dataclass(frozen=True)
class RefinedMask:
    """Direct-path mask gated by the speech mask (zero where speech is weak)."""

    irm_dpd: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.irm_dpd.shape


@dataclass(frozen=True)
class BinSet:
    """Ordered (frame, bin) indices passing the direct-path dominance test."""

    indices: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def frames(self) -> np.ndarray:
        return self.indices[:, 0]

    @property
    def bins(self) -> np.ndarray:
        return self.indices[:, 1]


def masks_from_powers(p_d: np.ndarray, p_r: np.ndarray, p_n: np.ndarray,
                      xi_n: float = 1e-4) -> MaskPair:
    """Mask pair from per-bin direct, reverberant, and noise powers.

    The shared denominator is max(P_d + P_r + P_n, xi_n); the speech mask
    carries P_d + P_r and the direct-path mask carries P_d.
    """
    denom = np.maximum(p_d + p_r + p_n, xi_n)
    return MaskPair(irm_s=(p_d + p_r) / denom, irm_d=p_d / denom,
                    provenance=PROVENANCE_ORACLE)


def oracle_masks(components, cfg: StftConfig, ref_channel: int = 0,
                 xi_n: float = 1e-4) -> MaskPair:
    """Compute target masks from separately rendered scene components.

    The speech mask is (P_d + P_r) over the regularized total power and the
    direct-path mask is P_d over the same denominator, where P_d, P_r, P_n
    are squared STFT magnitudes of the direct, reverberant, and noise
    components at the reference channel and the denominator is
    max(P_d + P_r + P_n, xi_n).

    Parameters
    ----------
    components : SceneComponents
        Rendered scene with aligned direct, reverb, and noise signals.
    cfg : StftConfig
        Analysis parameters shared by all three transforms.
    ref_channel : int
        Microphone used for the single-channel mask computation.
    xi_n : float
        Regularization power guarding ultra-low-power bins.
    """
    direct, reverb, noise = components.direct, components.reverb, components.noise
    if not (direct.n_samples == reverb.n_samples == noise.n_samples):
        raise ValueError("component lengths differ")
    if not (direct.sample_rate == reverb.sample_rate == noise.sample_rate):
        raise ValueError("component sample rates differ")
    p_d = np.abs(stft(direct, cfg).values[:, :, ref_channel]) ** 2
    p_r = np.abs(stft(reverb, cfg).values[:, :, ref_channel]) ** 2
    p_n = np.abs(stft(noise, cfg).values[:, :, ref_channel]) ** 2
    return masks_from_powers(p_d, p_r, p_n, xi_n)


def refine_dpd(masks: MaskPair, irm0: float = 0.5) -> RefinedMask:
    """Gate the direct-path mask: zero where the speech mask is below irm0."""
    return RefinedMask(irm_dpd=np.where(masks.irm_s < irm0, 0.0, masks.irm_d))


def select_bins(refined: RefinedMask, params: DpdParams) -> BinSet:
    """Pick the n_select largest refined-mask bins inside the analysis band.

    The pass threshold is realized implicitly as the value of the
    n_select-th largest bin. Ties break deterministically: higher value
    first, then lower frame, then lower bin. Bins with a zero refined mask
    are never selected, so the result can be smaller than n_select.
    """
    band = params.band
    n_frames, n_bins = refined.shape
    if band.bin_hi >= n_bins:
        raise ValueError("band exceeds the mask's bin range")
    sub = refined.irm_dpd[:, band.bin_lo : band.bin_hi + 1]
    vals = sub.ravel()  # t-major, so flat order is (t asc, f asc)
    order = np.argsort(-vals, kind="stable")
    order = order[vals[order] > 0.0][: params.n_select]
    width = sub.shape[1]
    indices = np.stack([order // width, order % width + band.bin_lo], axis=1)
    return BinSet(indices=indices)


def all_band_bins(n_frames: int, band: BandSelection) -> BinSet:
    """Every (frame, bin) pair in the band; the unmasked-baseline bin set."""
    t, f = np.meshgrid(np.arange(n_frames), band.bins(), indexing="ij")
    return BinSet(indices=np.stack([t.ravel(), f.ravel()], axis=1))
