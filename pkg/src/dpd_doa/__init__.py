"""DOA estimation toolkit with direct-path-dominance time-frequency masking."""

from .doa import (
    AngleGrid,
    ArrayGeometry,
    FreqCovariance,
    SpatialSpectrum,
    SteeringVector,
    covariance,
    music,
    pick_doa,
    srp_phat,
    steering,
)
from .evaluate import (
    CONDITIONS,
    Condition,
    is_correct,
    room_presets,
    run_condition,
    sample_training_scene,
    speech_shaped_noise,
)
from .fileio import FormatError, read_msk, read_spx, read_wav, write_msk, write_spx, write_wav
from .masking import (
    BinSet,
    DpdParams,
    MaskPair,
    RefinedMask,
    all_band_bins,
    oracle_masks,
    refine_dpd,
    select_bins,
)
from .room import (
    ArrayPose,
    DiffuseNoise,
    DirectionalNoise,
    Rir,
    RoomConfig,
    SceneComponents,
    SceneConfig,
    diffuse_noise,
    mix_at_snr,
    perturb_scene,
    render_scene,
    simulate_rir,
    split_rir,
)
from .stft import BandSelection, Spectrogram, StftConfig, TimeSignal, band_bins, istft, log_magnitude, stft

__version__ = "0.1.0"
