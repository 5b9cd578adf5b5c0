import numpy as np
import pytest

from easlab.synth import noise_track, speech_like


def test_speech_like_length_rate_and_peak():
    buf = speech_like(8000, 16000, rng_seed=3)
    assert len(buf) == 8000 and buf.sample_rate == 16000
    assert abs(np.max(np.abs(buf.samples)) - 0.5) < 1e-12


def test_speech_like_rejects_sub_quarter_second():
    with pytest.raises(ValueError):
        speech_like(3999, 16000)
    speech_like(4000, 16000)  # exactly 250 ms is fine


def test_speech_like_silent_lead_and_tail_are_quiet():
    buf = speech_like(16000, 16000, rng_seed=1)
    body = np.mean(buf.samples[3000:14000] ** 2)
    lead = np.mean(buf.samples[:1900] ** 2)
    tail = np.mean(buf.samples[-1200:] ** 2)
    # only the 1e-4 dither survives outside the envelope
    assert lead < 1e-4 * body
    assert tail < 1e-4 * body


def test_speech_like_is_seed_deterministic():
    a = speech_like(8000, 16000, rng_seed=7)
    b = speech_like(8000, 16000, rng_seed=7)
    c = speech_like(8000, 16000, rng_seed=8)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_speech_like_has_harmonic_energy_below_2khz():
    buf = speech_like(16000, 16000, rng_seed=2)
    spec = np.abs(np.fft.rfft(buf.samples)) ** 2
    freqs = np.fft.rfftfreq(len(buf), 1 / 16000)
    low = spec[(freqs > 80) & (freqs < 2000)].sum()
    high = spec[freqs >= 2000].sum()
    assert low > high  # voicing dominates frication


def test_noise_track_kinds_peak_and_determinism():
    for kind in ("white", "engine", "street"):
        a = noise_track(kind, 8000, 16000, rng_seed=4)
        b = noise_track(kind, 8000, 16000, rng_seed=4)
        assert len(a) == 8000 and a.sample_rate == 16000
        assert abs(np.max(np.abs(a.samples)) - 0.3) < 1e-12
        assert np.array_equal(a.samples, b.samples)


def test_noise_kinds_are_spectrally_distinct():
    n = 32000
    def centroid(kind):
        buf = noise_track(kind, n, 16000, rng_seed=11)
        spec = np.abs(np.fft.rfft(buf.samples)) ** 2
        freqs = np.fft.rfftfreq(n, 1 / 16000)
        return float((freqs * spec).sum() / spec.sum())
    c_white, c_engine, c_street = (centroid(k) for k in ("white", "engine", "street"))
    assert c_engine < c_street < c_white
    assert c_engine < 500  # hum plus rumble sits low


def test_noise_track_unknown_kind():
    with pytest.raises(ValueError):
        noise_track("ocean", 8000, 16000)
