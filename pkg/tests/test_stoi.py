import numpy as np
import pytest

from easlab import (DspError, SampleBuffer, mix_at_snr, resample, stoi)
from easlab.stoi import (SilentSignalError, StoiConfig, band_envelopes,
                         remove_silent_frames, silent_frame_mask,
                         third_octave_matrix)
from easlab.synth import noise_track, speech_like
from oracles import stoi_reference


def test_self_identity_and_sign_invariance(stoi_pairs):
    for clean, _, _ in stoi_pairs[:6]:
        assert abs(stoi(clean, clean).value - 1.0) < 1e-9
        flipped = SampleBuffer(-clean.samples, clean.sample_rate)
        assert abs(stoi(clean, flipped).value - 1.0) < 1e-9


def test_scale_invariance_of_processed_signal():
    clean = speech_like(8000, 10000, rng_seed=0)
    noise = noise_track("white", 24000, 10000, rng_seed=1)
    mix = mix_at_snr(clean, noise, 5.0, rng_seed=2).mixture
    base = stoi(clean, mix).value
    for gain in (0.25, 4.0):
        scaled = SampleBuffer(gain * mix.samples, 10000)
        assert abs(stoi(clean, scaled).value - base) < 1e-12


def test_matches_bruteforce_oracle(stoi_pairs):
    worst = 0.0
    for clean, degraded, _ in stoi_pairs[:8]:
        if clean.sample_rate != 10000:
            clean = resample(clean, 10000)
            degraded = resample(degraded, 10000)
        ours = stoi(clean, degraded).value
        ref = stoi_reference(clean.samples, degraded.samples)
        worst = max(worst, abs(ours - ref))
    assert worst < 1e-6


def test_monotone_in_snr():
    snrs = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
    for seed in range(3):
        clean = speech_like(12800, 16000, rng_seed=30 + seed)
        noise = noise_track("white", 40000, 16000, rng_seed=60 + seed)
        scores = [stoi(clean, mix_at_snr(clean, noise, s, rng_seed=7).mixture).value
                  for s in snrs]
        for lo, hi in zip(scores, scores[1:]):
            assert hi >= lo - 0.01


def test_band_matrix_geometry():
    bands = third_octave_matrix(StoiConfig())
    assert bands.weights.shape == (15, 257)
    # disjoint membership: each bin belongs to at most one band
    assert bands.weights.sum(axis=0).max() <= 1.0
    # centers follow the third-octave ratio
    ratios = bands.centers_hz[1:] / bands.centers_hz[:-1]
    assert np.allclose(ratios, 2.0 ** (1 / 3), atol=1e-12)
    assert bands.centers_hz[0] == 150.0
    # every band contains at least one bin at this fft size
    assert bands.weights.sum(axis=1).min() >= 1.0


def test_silence_mask_uses_clean_only():
    config = StoiConfig()
    clean = speech_like(8000, 10000, rng_seed=3)
    mask = silent_frame_mask(clean.samples, config)
    assert mask.any() and not mask.all()
    # leading silence in the synthesized fixture is dropped
    assert not mask[0]
    loud = SampleBuffer(np.ones_like(clean.samples), 10000)
    kept_clean, kept_loud = remove_silent_frames(clean, loud, config)
    assert len(kept_clean) == len(kept_loud)
    assert len(kept_clean) < len(clean)


def test_all_silent_raises():
    silent = SampleBuffer(np.zeros(8000), 10000)
    with pytest.raises(SilentSignalError):
        stoi(silent, silent)


def test_too_short_after_removal_raises():
    # a brief burst leaves fewer frames than one segment
    x = np.zeros(8000)
    x[3000:3400] = np.sin(np.arange(400) * 0.3)
    buf = SampleBuffer(x, 10000)
    with pytest.raises(SilentSignalError):
        stoi(buf, buf)


def test_band_envelopes_shape_and_rate_check():
    clean = speech_like(8000, 10000, rng_seed=4)
    env = band_envelopes(clean)
    assert env.shape[0] == 15 and np.all(env >= 0)
    with pytest.raises(DspError):
        band_envelopes(speech_like(8000, 16000, rng_seed=4))


def test_length_and_rate_mismatches_raise():
    a = speech_like(8000, 10000, rng_seed=5)
    with pytest.raises(DspError):
        stoi(a, SampleBuffer(a.samples[:-1], 10000))
    with pytest.raises(DspError):
        stoi(a, SampleBuffer(a.samples, 16000))


def test_degradation_lowers_score():
    clean = speech_like(8000, 10000, rng_seed=6)
    noise = noise_track("white", 24000, 10000, rng_seed=7)
    heavy = mix_at_snr(clean, noise, -10.0, rng_seed=8).mixture
    light = mix_at_snr(clean, noise, 15.0, rng_seed=8).mixture
    s_heavy, s_light = stoi(clean, heavy).value, stoi(clean, light).value
    assert s_heavy < s_light < 1.0
    assert s_heavy < 0.9
