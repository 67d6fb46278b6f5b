import numpy as np
import pytest

from dpd_doa.stft import (
    BandSelection,
    Spectrogram,
    StftConfig,
    TimeSignal,
    band_bins,
    hann_periodic,
    istft,
    log_magnitude,
    stft,
)

CFG = StftConfig()


def _random_signal(n, channels=1, seed=0, fs=16000.0):
    rng = np.random.default_rng(seed)
    return TimeSignal(data=rng.standard_normal((n, channels)), sample_rate=fs)


def test_frame_count_matches_hop_arithmetic():
    # 2.072 s at 16 kHz: (33152 - 512) / 128 + 1 = 256 frames
    sig = _random_signal(33152)
    spec = stft(sig, CFG)
    assert spec.n_frames == 256
    assert spec.n_bins == 257
    assert spec.n_channels == 1


def test_zero_signal_gives_zero_spectrogram():
    sig = TimeSignal(data=np.zeros(4096), sample_rate=16000.0)
    spec = stft(sig, CFG)
    assert np.all(spec.values == 0)


def test_on_bin_sinusoid_concentrates_at_its_bin():
    k = 40
    f = k * CFG.sample_rate / CFG.fft_size
    t = np.arange(8192) / CFG.sample_rate
    spec = stft(TimeSignal(np.sin(2 * np.pi * f * t), 16000.0), CFG)
    mag = np.abs(spec.values[3, :, 0])
    assert np.argmax(mag) == k
    # Hann transform: energy confined to the bin and its two neighbors
    outside = np.delete(mag, [k - 1, k, k + 1])
    assert outside.max() < 1e-9 * mag[k]


def test_signal_too_short_raises():
    with pytest.raises(ValueError, match="signal too short"):
        stft(_random_signal(CFG.fft_size - 1), CFG)


def test_round_trip_interior_samples():
    sig = _random_signal(16000, channels=2, seed=3)
    rec = istft(stft(sig, CFG), CFG)
    inner = slice(CFG.fft_size, sig.n_samples - CFG.fft_size)
    err = np.abs(rec.data[inner] - sig.data[inner]).max()
    assert err < 1e-6 * np.abs(sig.data[inner]).max()


def test_istft_of_zero_spectrogram_is_zero():
    spec = stft(TimeSignal(np.zeros(4096), 16000.0), CFG)
    assert np.all(istft(spec, CFG).data == 0)


def test_istft_rejects_mismatched_config():
    spec = stft(_random_signal(4096), CFG)
    with pytest.raises(ValueError):
        istft(spec, StftConfig(fft_size=256, hop=64))


def test_direct_overlap_add_oracle_round_trip():
    # independent WOLA oracle: accumulate windowed frames and window energy
    sig = _random_signal(16000, seed=11)
    spec = stft(sig, CFG)
    win = hann_periodic(CFG.fft_size)
    frames = np.fft.irfft(spec.values[:, :, 0], n=CFG.fft_size, axis=1)
    total = (spec.n_frames - 1) * CFG.hop + CFG.fft_size
    acc = np.zeros(total)
    den = np.zeros(total)
    for t in range(spec.n_frames):
        sl = slice(t * CFG.hop, t * CFG.hop + CFG.fft_size)
        acc[sl] += frames[t] * win
        den[sl] += win**2
    oracle = acc[den > 1e-12] / den[den > 1e-12]
    rec = istft(spec, CFG).data[den > 1e-12, 0]
    np.testing.assert_allclose(rec, oracle, rtol=0, atol=1e-12)
    inner = slice(CFG.fft_size, 16000 - CFG.fft_size)
    err = np.abs(istft(spec, CFG).data[inner, 0] - sig.data[inner, 0]).max()
    assert err < 1e-6


def test_linearity():
    x = _random_signal(8000, seed=1)
    y = _random_signal(8000, seed=2)
    combo = TimeSignal(2.5 * x.data - 1.25 * y.data, 16000.0)
    lhs = stft(combo, CFG).values
    rhs = 2.5 * stft(x, CFG).values - 1.25 * stft(y, CFG).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_parseval_with_window_energy_compensation():
    sig = _random_signal(12000, seed=5)
    spec = stft(sig, CFG)
    win = hann_periodic(CFG.fft_size)
    # one-sided spectrum: interior bins count twice
    w = np.full(CFG.n_bins, 2.0)
    w[0] = w[-1] = 1.0
    freq_energy = np.sum(w * np.abs(spec.values[:, :, 0]) ** 2) / CFG.fft_size
    den = np.zeros(sig.n_samples)
    for t in range(spec.n_frames):
        den[t * CFG.hop : t * CFG.hop + CFG.fft_size] += win**2
    time_energy = np.sum(sig.data[:, 0] ** 2 * den)
    assert abs(freq_energy - time_energy) < 1e-6 * time_energy


def test_log_magnitude_shape_and_range():
    spec = stft(_random_signal(33152, seed=9), CFG)
    out, degenerate = log_magnitude(spec, channel=0)
    assert out.shape == (256, 256)  # DC bin dropped
    assert not degenerate
    assert out.min() == -1.0
    assert out.max() == 1.0


def test_log_magnitude_two_level_input_hits_endpoints():
    vals = np.full((4, 257, 1), 2.0, dtype=complex)
    vals[0, 5, 0] = 8.0
    spec = Spectrogram(vals, 16000.0, 512)
    out, degenerate = log_magnitude(spec, 0)
    assert not degenerate
    assert set(np.unique(out)) == {-1.0, 1.0}


def test_log_magnitude_degenerate_constant_input():
    vals = np.full((4, 257, 1), 3.0, dtype=complex)
    spec = Spectrogram(vals, 16000.0, 512)
    out, degenerate = log_magnitude(spec, 0)
    assert degenerate
    assert np.all(out == 0)


def test_log_magnitude_bad_channel():
    spec = stft(_random_signal(4096), CFG)
    with pytest.raises(ValueError):
        log_magnitude(spec, 1)


def test_band_bins_paper_defaults():
    band = band_bins(CFG, 1000.0, 8000.0)
    assert (band.bin_lo, band.bin_hi) == (32, 256)
    assert band.n_bins == 225


def test_band_bins_full_range():
    band = band_bins(CFG, 0.0, 8000.0)
    assert (band.bin_lo, band.bin_hi) == (0, 256)
    assert band.n_bins == 257


def test_band_bins_empty_band_raises():
    with pytest.raises(ValueError):
        band_bins(CFG, 1000.0, 1000.0)


def test_band_selection_validates_order():
    with pytest.raises(ValueError):
        BandSelection(f_lo=0.0, f_hi=1.0, bin_lo=5, bin_hi=2)


def test_config_validation():
    with pytest.raises(ValueError):
        StftConfig(fft_size=500)
    with pytest.raises(ValueError):
        StftConfig(hop=100)
