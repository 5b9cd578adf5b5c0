import numpy as np
import pytest

from easlab import (DspError, SampleBuffer, mix_at_snr, stft, stoi)
from easlab.mmse import (MmseConfig, enhance_mmse, estimate_noise_psd,
                         mmse_gain)
from easlab.synth import noise_track, speech_like
from oracles import mmse_gain_quadrature


def test_gain_matches_quadrature_oracle_at_unity():
    assert abs(mmse_gain(1.0, 1.0) - mmse_gain_quadrature(1.0, 1.0)) < 1e-6


def test_gain_matches_quadrature_on_grid():
    worst = 0.0
    for xi in (0.1, 1.0, 4.0):
        for gamma in (0.5, 1.0, 8.0):
            worst = max(worst, abs(mmse_gain(xi, gamma)
                                   - mmse_gain_quadrature(xi, gamma)))
    assert worst < 1e-9, worst


def test_gain_vectorizes_and_stays_finite_at_extremes():
    xi = np.array([0.01, 1.0, 100.0, 1e4])
    gamma = np.array([0.1, 1.0, 50.0, 1e4])
    g = mmse_gain(xi, gamma)
    assert g.shape == xi.shape and np.all(np.isfinite(g)) and np.all(g > 0)
    # strong speech evidence drives the gain toward unity
    assert abs(mmse_gain(1e6, 1e6) - 1.0) < 1e-3
    # weak prior SNR suppresses
    assert mmse_gain(0.01, 1.0) < 0.3


def test_gain_rejects_nonpositive_inputs():
    with pytest.raises(DspError):
        mmse_gain(0.0, 1.0)
    with pytest.raises(DspError):
        mmse_gain(1.0, -2.0)


def test_noise_psd_estimates_white_level():
    rng = np.random.default_rng(0)
    sigma = 0.1
    buf = SampleBuffer(rng.normal(scale=sigma, size=64000), 16000)
    spec = stft(buf, 512, 256)
    psd = estimate_noise_psd(spec, 40)
    # windowed white noise: E|X(k)|^2 = sigma^2 * sum(w^2) at interior bins
    expected = sigma ** 2 * np.sum((0.5 - 0.5 * np.cos(2 * np.pi * np.arange(512) / 512)) ** 2)
    interior = psd.power[5:-5]
    assert abs(np.median(interior) / expected - 1.0) < 0.15


def test_enhance_improves_stoi_at_zero_db():
    deltas = []
    for seed in range(3):
        clean = speech_like(12800, 16000, rng_seed=40 + seed)
        noise = noise_track("white", 40000, 16000, rng_seed=70 + seed)
        noisy = mix_at_snr(clean, noise, 0.0, rng_seed=seed).mixture
        enhanced = enhance_mmse(noisy)
        assert len(enhanced) == len(noisy)
        deltas.append(stoi(clean, enhanced).value - stoi(clean, noisy).value)
    assert np.mean(deltas) >= 0.0


def test_enhance_reduces_noise_power_in_silence():
    clean = speech_like(12800, 16000, rng_seed=5)
    noise = noise_track("white", 40000, 16000, rng_seed=6)
    noisy = mix_at_snr(clean, noise, 0.0, rng_seed=7).mixture
    enhanced = enhance_mmse(noisy)
    # the lead-in is pure noise; suppression there should be strong
    lead = slice(0, 1500)
    assert np.mean(enhanced.samples[lead] ** 2) < 0.5 * np.mean(noisy.samples[lead] ** 2)


def test_gain_floor_limits_suppression():
    config = MmseConfig(gain_floor=0.25)
    clean = speech_like(12800, 16000, rng_seed=8)
    noise = noise_track("white", 40000, 16000, rng_seed=9)
    noisy = mix_at_snr(clean, noise, 5.0, rng_seed=1).mixture
    floored = enhance_mmse(noisy, config)
    default = enhance_mmse(noisy)
    lead = slice(0, 1500)
    assert np.mean(floored.samples[lead] ** 2) > np.mean(default.samples[lead] ** 2)


def test_enhance_rejects_silence_and_bad_config():
    with pytest.raises(DspError):
        enhance_mmse(SampleBuffer(np.zeros(8000), 16000))
    with pytest.raises(DspError):
        MmseConfig(dd_alpha=1.5)
    with pytest.raises(DspError):
        MmseConfig(noise_init_frames=0)


def test_enhancement_is_deterministic():
    clean = speech_like(12800, 16000, rng_seed=10)
    noise = noise_track("engine", 40000, 16000, rng_seed=11)
    noisy = mix_at_snr(clean, noise, 3.0, rng_seed=2).mixture
    a = enhance_mmse(noisy).samples
    b = enhance_mmse(noisy).samples
    assert np.array_equal(a, b)
