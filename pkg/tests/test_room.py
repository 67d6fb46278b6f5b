import json
import math

import numpy as np
import pytest
from scipy.signal import correlate, correlation_lags, csd, resample

from dpd_doa.doa import ArrayGeometry
from dpd_doa.evaluate import speech_shaped_noise
from dpd_doa.room import (
    ArrayPose,
    DiffuseNoise,
    DirectionalNoise,
    RoomConfig,
    SceneConfig,
    diffuse_noise,
    mix_at_snr,
    perturb_scene,
    render_scene,
    scene_from_dict,
    scene_to_dict,
    simulate_rir,
    split_rir,
)
from dpd_doa.stft import TimeSignal

FS = 16000.0
ROOM1 = RoomConfig(dims=(7.32, 5.5, 3.0), t60=0.32)


def _scene(room=ROOM1, doa=30.0, dist=3.0, noise=DirectionalNoise(doa=-30.0),
           snr=0.0, seed=1, kind="ula"):
    geom = ArrayGeometry.ula(0.035) if kind == "ula" else ArrayGeometry.uca(0.035)
    return SceneConfig(room=room, array=ArrayPose(center=(3.0, 2.1, 1.2),
                                                  geometry=geom),
                       speaker_doa=doa, speaker_distance=dist,
                       noise_kind=noise, snr_db=snr, rng_seed=seed)


def schroeder_t60(taps, fs):
    """Backward-integration T60 oracle: line fit on the -5..-25 dB EDC."""
    edc = np.cumsum(taps[::-1] ** 2)[::-1]
    edc /= edc[0]
    db = 10.0 * np.log10(np.maximum(edc, 1e-30))
    i_lo = int(np.argmax(db <= -5.0))
    i_hi = int(np.argmax(db <= -25.0))
    t = np.arange(taps.size) / fs
    a = np.vstack([t[i_lo:i_hi], np.ones(i_hi - i_lo)]).T
    slope = np.linalg.lstsq(a, db[i_lo:i_hi], rcond=None)[0][0]
    return -60.0 / slope


def test_room_config_validation():
    with pytest.raises(ValueError):
        RoomConfig(dims=(5.0, -1.0, 3.0), t60=0.3)
    # t60 far too long for a tiny room: Sabine absorption >= 1
    with pytest.raises(ValueError, match="Sabine absorption"):
        RoomConfig(dims=(2.0, 2.0, 2.0), t60=0.01)
    assert 0 < ROOM1.reflection_coefficient < 1


def test_rir_direct_arrival_at_3m():
    rir = simulate_rir(ROOM1, (4.5, 4.7, 1.2), (3.0, 2.1, 1.2), FS)
    assert rir.direct_arrival_index == 140  # round(3 / 343 * 16000)
    assert abs(int(np.argmax(np.abs(rir.taps))) - 140) <= 1


def test_rir_positions_must_be_inside():
    with pytest.raises(ValueError, match="outside room"):
        simulate_rir(ROOM1, (9.0, 1.0, 1.0), (3.0, 2.1, 1.2), FS)
    with pytest.raises(ValueError, match="outside room"):
        simulate_rir(ROOM1, (4.5, 4.7, 1.2), (3.0, 9.1, 1.2), FS)


def test_anechoic_rir_is_a_single_impulse():
    room = RoomConfig(dims=ROOM1.dims, t60=0.0)
    rir = simulate_rir(room, (4.5, 4.7, 1.2), (3.0, 2.1, 1.2), FS)
    direct, reverb = split_rir(rir)
    assert reverb.energy == 0.0
    assert direct.energy > 0
    tail = rir.taps[rir.direct_arrival_index + 17 :]
    assert np.sum(tail**2) < 1e-10 * rir.energy


def test_schroeder_t60_within_tolerance():
    for dims, t60, src, mic in (
        ((7.32, 5.5, 3.0), 0.32, (4.5, 4.7, 1.2), (3.0, 2.1, 1.2)),
        ((5.9, 4.2, 3.3), 0.65, (3.5, 3.53, 1.5), (2.5, 1.8, 1.5)),
    ):
        rir = simulate_rir(RoomConfig(dims=dims, t60=t60), src, mic, FS)
        measured = schroeder_t60(rir.taps, FS)
        assert abs(measured - t60) <= 0.2 * t60, (t60, measured)


def test_split_partition_identity():
    rir = simulate_rir(ROOM1, (4.5, 4.7, 1.2), (3.0, 2.1, 1.2), FS)
    direct, reverb = split_rir(rir, 1.0)
    np.testing.assert_array_equal(direct.taps + reverb.taps, rir.taps)
    # 1 ms window = 16 samples past arrival, index-arithmetic oracle
    cut = rir.direct_arrival_index + 16
    assert direct.energy == pytest.approx(np.sum(rir.taps[: cut + 1] ** 2))
    assert np.all(direct.taps[cut + 1 :] == 0)


def test_diffuse_noise_seeding_and_shape():
    pos = ArrayGeometry.ula(0.035).positions
    a = diffuse_noise(pos, 0.5, FS, seed=3)
    b = diffuse_noise(pos, 0.5, FS, seed=3)
    c = diffuse_noise(pos, 0.5, FS, seed=4)
    assert a.data.shape == (8000, 4)
    np.testing.assert_array_equal(a.data, b.data)
    assert np.any(a.data != c.data)
    with pytest.raises(ValueError):
        diffuse_noise(pos[:1], 0.5, FS, seed=0)


def test_diffuse_coherence_tracks_sinc():
    d = 0.035
    pos = np.array([[0.0, 0.0, 0.0], [d, 0.0, 0.0]])
    sig = diffuse_noise(pos, 10.0, FS, seed=7)
    f, pxy = csd(sig.data[:, 0], sig.data[:, 1], fs=FS, nperseg=1024)
    _, pxx = csd(sig.data[:, 0], sig.data[:, 0], fs=FS, nperseg=1024)
    _, pyy = csd(sig.data[:, 1], sig.data[:, 1], fs=FS, nperseg=1024)
    coh = np.real(pxy / np.sqrt(pxx * pyy))
    sel = (f >= 500) & (f <= 4000)
    arg = 2 * np.pi * f[sel] * d / 343.0
    model = np.sinc(arg / np.pi)  # sin(x)/x
    mae = np.mean(np.abs(coh[sel] - model))
    assert mae < 0.1, mae
    # coherence tends to 1 toward f -> 0
    assert coh[1] > 0.9


def test_mix_at_snr_examples():
    rng = np.random.default_rng(0)
    x = TimeSignal(rng.standard_normal(8000), FS)
    assert mix_at_snr(x, x, 0.0) == pytest.approx(1.0)
    assert mix_at_snr(x, x, 20.0) == pytest.approx(0.1)
    assert mix_at_snr(x, x, math.inf) == 0.0
    with pytest.raises(ValueError, match="zero energy"):
        mix_at_snr(x, TimeSignal(np.zeros(8000), FS), 0.0)


def test_mix_at_snr_achieves_target():
    rng = np.random.default_rng(1)
    speech = TimeSignal(1.7 * rng.standard_normal(16000), FS)
    noise = TimeSignal(0.3 * rng.standard_normal(16000), FS)
    for target in (-5.0, 0.0, 12.5):
        alpha = mix_at_snr(speech, noise, target)
        measured = 10 * np.log10(np.mean(speech.data**2)
                                 / np.mean((alpha * noise.data) ** 2))
        assert abs(measured - target) < 0.01


def test_render_component_identity_and_determinism():
    scene = _scene(snr=5.0)
    speech = speech_shaped_noise(seed=2)
    noise = TimeSignal(np.random.default_rng(3).standard_normal(33152), FS)
    a = render_scene(scene, speech, noise)
    b = render_scene(scene, speech, noise)
    total = a.direct.data + a.reverb.data + a.noise.data
    np.testing.assert_array_equal(a.mixture.data, total)
    np.testing.assert_array_equal(a.mixture.data, b.mixture.data)
    assert a.mixture.data.shape == (33152, 4)
    # rendered SNR at mic 1 matches the scene config
    ref = a.direct.data[:, 0] + a.reverb.data[:, 0]
    measured = 10 * np.log10(np.mean(ref**2) / np.mean(a.noise.data[:, 0] ** 2))
    assert abs(measured - 5.0) < 0.01


def test_render_noise_free_and_anechoic():
    anechoic = RoomConfig(dims=ROOM1.dims, t60=0.0)
    scene = _scene(room=anechoic, snr=math.inf)
    comps = render_scene(scene, speech_shaped_noise(seed=5))
    assert np.all(comps.noise.data == 0)
    np.testing.assert_array_equal(comps.mixture.data,
                                  comps.direct.data + comps.reverb.data)
    assert np.sum(comps.reverb.data**2) < 1e-10 * np.sum(comps.direct.data**2)


def test_render_intermic_delay_matches_geometry():
    # 3.5 cm ULA, 30 degrees: d sin(30)/c = 51.02 us = 0.816 samples at 16 kHz
    anechoic = RoomConfig(dims=ROOM1.dims, t60=0.0)
    comps = render_scene(_scene(room=anechoic, snr=math.inf),
                         speech_shaped_noise(seed=6))
    up = 16
    x0 = resample(comps.direct.data[:, 0], comps.direct.n_samples * up)
    x1 = resample(comps.direct.data[:, 1], comps.direct.n_samples * up)
    cc = correlate(x0, x1, mode="full")
    lags = correlation_lags(x0.size, x1.size, mode="full")
    lag = lags[np.argmax(cc)] / up
    assert abs(lag - 0.816) < 0.1, lag


def test_render_requires_mono_and_noise_source():
    scene = _scene(snr=0.0)
    stereo = TimeSignal(np.zeros((33152, 2)), FS)
    with pytest.raises(ValueError, match="mono"):
        render_scene(scene, stereo)
    with pytest.raises(ValueError, match="noise source"):
        render_scene(scene, speech_shaped_noise(seed=1))


def test_render_diffuse_noise_path():
    scene = _scene(noise=DiffuseNoise(), snr=10.0, seed=9)
    comps = render_scene(scene, speech_shaped_noise(seed=9))
    assert np.any(comps.noise.data != 0)
    ref = comps.direct.data[:, 0] + comps.reverb.data[:, 0]
    measured = 10 * np.log10(np.mean(ref**2)
                             / np.mean(comps.noise.data[:, 0] ** 2))
    assert abs(measured - 10.0) < 0.01


def test_perturb_zero_fraction_is_identity():
    scene = _scene()
    out = perturb_scene(scene, 0.0, seed=0)
    assert out.room.dims == scene.room.dims
    assert out.array.center == scene.array.center
    assert out.speaker_distance == scene.speaker_distance
    assert out.array.geometry is scene.array.geometry


def test_perturb_bounds_and_determinism():
    scene = _scene()
    a = perturb_scene(scene, 0.1, seed=11)
    b = perturb_scene(scene, 0.1, seed=11)
    assert a.room.dims == b.room.dims
    assert a.array.center == b.array.center
    assert a.speaker_distance == b.speaker_distance
    for orig, new in zip(scene.room.dims + scene.array.center
                         + (scene.speaker_distance,),
                         a.room.dims + a.array.center + (a.speaker_distance,)):
        assert abs(new / orig - 1.0) <= 0.1
    assert a.speaker_doa == scene.speaker_doa


def test_perturb_invalid_fraction():
    with pytest.raises(ValueError):
        perturb_scene(_scene(), 0.6, seed=0)


def test_scene_geometry_validation():
    with pytest.raises(ValueError, match="speaker outside"):
        _scene(doa=-90.0, dist=3.0)  # lands on the x=0 wall
    with pytest.raises(ValueError):
        _scene(doa=100.0)


def test_scene_json_round_trip():
    scene = _scene(noise=DirectionalNoise(doa=-30.0, distance=2.0), snr=math.inf)
    doc = json.loads(json.dumps(scene_to_dict(scene)))
    back = scene_from_dict(doc)
    assert back.room.dims == scene.room.dims
    assert back.array.center == scene.array.center
    assert back.speaker_doa == scene.speaker_doa
    assert back.noise_kind == scene.noise_kind
    assert math.isinf(back.snr_db)
    assert back.rng_seed == scene.rng_seed
    with pytest.raises(ValueError):
        scene_from_dict({"room": {"dims": [1, 1, 1]}})
