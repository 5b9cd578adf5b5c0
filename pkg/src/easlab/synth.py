"""Deterministic synthetic fixtures: speech-shaped utterances and noise beds.

Nothing here pretends to be real speech; the generators exist so tests,
demos, and listening-test sessions can run without a corpus. The utterances
carry the properties the pipeline cares about: a drifting harmonic stack
(voicing), syllable-rate amplitude modulation, high-band noise bursts
(frication), a low noise floor so every third-octave band stays alive, and
silent lead-in/tail regions.
"""
from __future__ import annotations

import numpy as np
import scipy.signal

from .dsp import SampleBuffer


def speech_like(n_samples: int, sample_rate: int = 16000, rng_seed: int = 0,
                lead_silence_s: float = 0.12, tail_silence_s: float = 0.08) -> SampleBuffer:
    """One synthetic utterance, peak-normalized to 0.5."""
    if n_samples < sample_rate // 4:
        raise ValueError("utterance shorter than 250 ms")
    rng = np.random.default_rng(rng_seed)
    t = np.arange(n_samples) / sample_rate

    f0 = rng.uniform(100.0, 180.0) * (1.0 + 0.15 * np.sin(
        2 * np.pi * rng.uniform(0.4, 1.2) * t + rng.uniform(0, 2 * np.pi)))
    phase = np.cumsum(2 * np.pi * f0 / sample_rate)
    top = min(4800.0, 0.45 * sample_rate)
    voiced = np.zeros(n_samples)
    h = 1
    while h * np.max(f0) < top:
        voiced += np.cos(h * phase + rng.uniform(0, 2 * np.pi)) / np.sqrt(h)
        h += 1

    syllable_hz = rng.uniform(2.5, 5.5)
    am_phase = rng.uniform(0, 2 * np.pi)
    am = 0.55 + 0.45 * np.sin(2 * np.pi * syllable_hz * t + am_phase)
    voiced *= am

    # high-band bursts in antiphase with the voiced envelope
    sos = scipy.signal.butter(4, 2000.0, btype="highpass", fs=sample_rate,
                              output="sos")
    frication = scipy.signal.sosfilt(sos, rng.standard_normal(n_samples))
    frication *= (0.55 - 0.45 * np.sin(2 * np.pi * syllable_hz * t + am_phase))
    sig = voiced + 0.25 * frication / max(np.max(np.abs(frication)), 1e-12) \
        * np.max(np.abs(voiced))

    lead = int(lead_silence_s * sample_rate)
    tail = int(tail_silence_s * sample_rate)
    envelope = np.ones(n_samples)
    envelope[:lead] = 0.0
    if tail:
        envelope[-tail:] = 0.0
    ramp = int(0.02 * sample_rate)
    if ramp and lead + tail + 2 * ramp < n_samples:
        up = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        envelope[lead:lead + ramp] = up
        envelope[n_samples - tail - ramp:n_samples - tail] = up[::-1]
    sig *= envelope

    sig += 1e-4 * rng.standard_normal(n_samples)  # keeps every band non-degenerate
    return SampleBuffer(0.5 * sig / np.max(np.abs(sig)), sample_rate)


def noise_track(kind: str, n_samples: int, sample_rate: int = 16000,
                rng_seed: int = 0) -> SampleBuffer:
    """Stationary-ish noise beds: 'white', 'engine' (harmonic hum + rumble),
    or 'street' (1/f-shaped with occasional swells)."""
    rng = np.random.default_rng(rng_seed)
    white = rng.standard_normal(n_samples)
    if kind == "white":
        sig = white
    elif kind == "engine":
        t = np.arange(n_samples) / sample_rate
        base = rng.uniform(40.0, 55.0)
        hum = np.zeros(n_samples)
        for h in range(1, 9):
            hum += np.sin(2 * np.pi * base * h * t + rng.uniform(0, 2 * np.pi)) / h
        sos = scipy.signal.butter(2, 400.0, btype="lowpass", fs=sample_rate,
                                  output="sos")
        rumble = scipy.signal.sosfilt(sos, white)
        sig = hum / np.max(np.abs(hum)) + 0.8 * rumble / np.max(np.abs(rumble)) \
            + 0.05 * white
    elif kind == "street":
        # first-order recursive smoothing approximates a 1/f slope
        pink = scipy.signal.lfilter([1.0], [1.0, -0.95], white)
        t = np.arange(n_samples) / sample_rate
        swell = 1.0 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.1, 0.3) * t
                                   + rng.uniform(0, 2 * np.pi))
        sig = pink * swell + 0.1 * white
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return SampleBuffer(0.3 * sig / np.max(np.abs(sig)), sample_rate)
