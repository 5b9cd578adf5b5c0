"""Short-time objective intelligibility: the evaluation metric used across
the lab and the numeric reference for the differentiable objective.

Pipeline: silent-frame removal (mask from the clean signal), STFT,
one-third-octave band envelopes, per-segment normalization and clipping,
then the mean Pearson correlation over all bands and 30-frame segments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import DspError, SampleBuffer, frame_signal, get_window, resample

# guards a division by an exactly-zero envelope energy; far below any
# tolerance in use, so non-degenerate scores are unaffected
ENERGY_FLOOR = 1e-300


class SilentSignalError(DspError):
    """Raised when a stimulus is silent or too short after silence removal."""


@dataclass(frozen=True)
class StoiConfig:
    """All constants of the intelligibility computation."""

    eval_rate: int = 10000
    frame_len: int = 256
    hop: int = 128
    fft_len: int = 512
    n_bands: int = 15
    lowest_center_hz: float = 150.0
    segment_frames: int = 30
    dyn_range_db: float = 40.0
    clip_beta_db: float = -15.0

    def __post_init__(self):
        if self.n_bands < 1 or self.segment_frames < 2:
            raise DspError("need n_bands >= 1 and segment_frames >= 2")
        if min(self.eval_rate, self.frame_len, self.hop, self.fft_len,
               self.lowest_center_hz, self.dyn_range_db) <= 0:
            raise DspError("config values must be positive")


@dataclass(frozen=True)
class OctaveBandMatrix:
    """Binary band-membership weights for the one-third-octave analysis."""

    weights: np.ndarray      # (n_bands, n_bins) of {0, 1}
    centers_hz: np.ndarray
    edges_hz: np.ndarray     # (n_bands, 2)


@dataclass(frozen=True)
class StoiScore:
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DspError("non-finite intelligibility score")


def third_octave_matrix(config: StoiConfig = StoiConfig()) -> OctaveBandMatrix:
    """Band k is centered at lowest*2^(k/3); edges sit a sixth-octave out.

    An FFT bin belongs to a band when its center frequency falls inside
    [low, high); shared edges keep memberships disjoint.
    """
    k = np.arange(config.n_bands)
    centers = config.lowest_center_hz * 2.0 ** (k / 3.0)
    lows = centers * 2.0 ** (-1.0 / 6.0)
    highs = centers * 2.0 ** (1.0 / 6.0)
    n_bins = config.fft_len // 2 + 1
    bin_hz = np.arange(n_bins) * config.eval_rate / config.fft_len
    weights = ((bin_hz[None, :] >= lows[:, None]) &
               (bin_hz[None, :] < highs[:, None])).astype(np.float64)
    return OctaveBandMatrix(weights=weights, centers_hz=centers,
                            edges_hz=np.column_stack([lows, highs]))


def frame_energies_db(x: np.ndarray, config: StoiConfig) -> np.ndarray:
    """20*log10 of each windowed frame's norm; -inf for all-zero frames."""
    w = get_window("hann", config.frame_len)
    frames = frame_signal(x, config.frame_len, config.hop) * w
    norms = np.sqrt(np.sum(frames ** 2, axis=1))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(norms)


def silent_frame_mask(clean: np.ndarray, config: StoiConfig) -> np.ndarray:
    """True for frames retained by the dynamic-range criterion."""
    energies = frame_energies_db(clean, config)
    if np.all(np.isneginf(energies)):
        raise SilentSignalError("clean reference is silent in every frame")
    return energies > energies.max() - config.dyn_range_db


def overlap_add_frames(frames: np.ndarray, hop: int) -> np.ndarray:
    n, frame_len = frames.shape
    out = np.zeros((n - 1) * hop + frame_len)
    for m in range(n):
        out[m * hop:m * hop + frame_len] += frames[m]
    return out


def apply_silence_mask(x: np.ndarray, mask: np.ndarray, config: StoiConfig) -> np.ndarray:
    """Keep the masked frames and rebuild the signal by windowed overlap-add."""
    w = get_window("hann", config.frame_len)
    frames = frame_signal(x, config.frame_len, config.hop)[mask] * w
    return overlap_add_frames(frames, config.hop)


def remove_silent_frames(clean: SampleBuffer, processed: SampleBuffer,
                         config: StoiConfig = StoiConfig()):
    """Drop frames whose *clean* energy is > dyn_range_db below the maximum,
    from both signals, and rebuild each by overlap-add."""
    if len(clean) != len(processed) or clean.sample_rate != processed.sample_rate:
        raise DspError("clean and processed must share length and rate")
    mask = silent_frame_mask(clean.samples, config)
    if not mask.any():
        raise SilentSignalError("no frames survive silence removal")
    rate = clean.sample_rate
    return (SampleBuffer(apply_silence_mask(clean.samples, mask, config), rate),
            SampleBuffer(apply_silence_mask(processed.samples, mask, config), rate))


def band_envelopes(buffer: SampleBuffer, config: StoiConfig = StoiConfig(),
                   bands: OctaveBandMatrix | None = None) -> np.ndarray:
    """(n_bands, n_frames) matrix of per-band root-energy envelopes."""
    if buffer.sample_rate != config.eval_rate:
        raise DspError(f"band analysis expects {config.eval_rate} Hz input")
    bands = bands or third_octave_matrix(config)
    w = get_window("hann", config.frame_len)
    frames = frame_signal(buffer.samples, config.frame_len, config.hop) * w
    spec = np.fft.rfft(frames, n=config.fft_len, axis=1)
    power = np.abs(spec) ** 2                       # (n_frames, n_bins)
    return np.sqrt(power @ bands.weights.T).T       # (n_bands, n_frames)


def segment_correlations(env_clean: np.ndarray, env_proc: np.ndarray,
                         config: StoiConfig) -> np.ndarray:
    """Correlation of every (band, segment) pair after normalization and
    clipping of the processed envelope segment."""
    n = config.segment_frames
    n_frames = env_clean.shape[1]
    if n_frames < n:
        raise SilentSignalError(
            f"only {n_frames} frames after silence removal; need >= {n}")
    clip_gain = 10.0 ** (-config.clip_beta_db / 20.0)

    # (n_bands, n_segments, N) sliding segments, one per frame position
    x = np.lib.stride_tricks.sliding_window_view(env_clean, n, axis=1)
    y = np.lib.stride_tricks.sliding_window_view(env_proc, n, axis=1)

    alpha = np.sqrt(np.sum(x ** 2, axis=2, keepdims=True) /
                    np.maximum(np.sum(y ** 2, axis=2, keepdims=True), ENERGY_FLOOR))
    y = np.minimum(alpha * y, x * (1.0 + clip_gain))

    xc = x - x.mean(axis=2, keepdims=True)
    yc = y - y.mean(axis=2, keepdims=True)
    denom = np.sqrt(np.sum(xc ** 2, axis=2)) * np.sqrt(np.sum(yc ** 2, axis=2))
    num = np.sum(xc * yc, axis=2)
    # num is exactly 0 whenever denom is, so the floor pins 0/0 cases to 0
    return num / np.maximum(denom, ENERGY_FLOOR)


def stoi(clean: SampleBuffer, processed: SampleBuffer,
         config: StoiConfig = StoiConfig()) -> StoiScore:
    """Intelligibility of `processed` against the clean reference."""
    if len(clean) != len(processed):
        raise DspError("clean and processed must have equal length")
    if clean.sample_rate != processed.sample_rate:
        raise DspError("clean and processed sample rates differ")
    clean = resample(clean, config.eval_rate)
    processed = resample(processed, config.eval_rate)
    clean, processed = remove_silent_frames(clean, processed, config)
    bands = third_octave_matrix(config)
    env_c = band_envelopes(clean, config, bands)
    env_p = band_envelopes(processed, config, bands)
    corr = segment_correlations(env_c, env_p, config)
    return StoiScore(float(corr.mean()))
