"""Shared signal primitives: WAV I/O, resampling, STFT/ISTFT, IIR filters,
RMS utilities and SNR-controlled mixing.

Everything operates on float64 internally; quantization happens only at the
WAV boundary.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.io.wavfile
import scipy.signal
import scipy.sparse


class DspError(ValueError):
    """Invalid signal, filter, or parameter."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class SampleBuffer:
    """Mono waveform plus its sample rate. The universal signal currency.

    Samples are dimensionless amplitudes, nominally in [-1, 1].
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DspError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise DspError("samples contain non-finite values")
        if int(self.sample_rate) <= 0:
            raise DspError(f"sample_rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def copy(self) -> "SampleBuffer":
        return SampleBuffer(self.samples.copy(), self.sample_rate)


@dataclass
class Spectrogram:
    """Complex STFT frames with the settings needed to invert them."""

    frames: np.ndarray          # (n_frames, n_bins) complex
    frame_len: int
    hop: int
    fft_len: int
    window: str
    sample_rate: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        if self.frames.ndim != 2:
            raise DspError("frames must be a 2-D matrix (n_frames x n_bins)")
        if self.hop > self.frame_len:
            raise DspError("hop must not exceed frame_len")
        if self.fft_len < self.frame_len:
            raise DspError("fft_len must be >= frame_len")
        n_bins = self.fft_len // 2 + 1
        if self.frames.shape[1] != n_bins:
            raise DspError(f"expected {n_bins} bins for fft_len {self.fft_len}, "
                           f"got {self.frames.shape[1]}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


@dataclass
class FilterCascade:
    """IIR filter as cascaded second-order sections plus an overall gain.

    Each section is (b0, b1, b2, a1, a2) with a0 normalized to 1.
    """

    sections: np.ndarray        # (n_sections, 5)
    overall_gain: float = 1.0

    def __post_init__(self):
        self.sections = np.atleast_2d(np.asarray(self.sections, dtype=np.float64))
        if self.sections.shape[1] != 5:
            raise DspError("each section must be (b0, b1, b2, a1, a2)")
        if not self.is_stable():
            raise DspError("unstable cascade: pole on or outside the unit circle")

    def is_stable(self) -> bool:
        for b0, b1, b2, a1, a2 in self.sections:
            poles = np.roots([1.0, a1, a2])
            if np.any(np.abs(poles) >= 1.0):
                return False
        return True

    def as_sos(self) -> np.ndarray:
        """scipy-style (n_sections, 6) array; gain folded into the first section."""
        sos = np.zeros((len(self.sections), 6))
        sos[:, :3] = self.sections[:, :3]
        sos[:, 3] = 1.0
        sos[:, 4:] = self.sections[:, 3:]
        sos[0, :3] *= self.overall_gain
        return sos

    def frequency_response(self, freqs_hz, sample_rate):
        """Complex response at the given frequencies."""
        w = 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / sample_rate
        _, h = scipy.signal.sosfreqz(self.as_sos(), worN=w)
        return h


@dataclass
class NoisyMixture:
    """A clean signal, the scaled noise segment actually added, and their sum."""

    clean: SampleBuffer
    noise_segment: SampleBuffer
    mixture: SampleBuffer
    target_snr_db: float
    achieved_snr_db: float

    def __post_init__(self):
        lens = {len(self.clean), len(self.noise_segment), len(self.mixture)}
        rates = {self.clean.sample_rate, self.noise_segment.sample_rate,
                 self.mixture.sample_rate}
        if len(lens) != 1 or len(rates) != 1:
            raise DspError("clean, noise segment and mixture must share length and rate")
        if abs(self.achieved_snr_db - self.target_snr_db) > 0.1:
            raise DspError("achieved SNR deviates from target by more than 0.1 dB")


# ---------------------------------------------------------------------------
# WAV I/O
# ---------------------------------------------------------------------------

def load_wav(path) -> SampleBuffer:
    """Load a mono PCM-16 or float-32 WAV, scaled to [-1, 1]."""
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DspError(f"unreadable WAV file {path}: {exc}") from exc
    if data.ndim > 1:
        raise DspError(f"{path}: multi-channel input not supported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise DspError(f"{path}: unsupported sample encoding {data.dtype}")
    return SampleBuffer(samples, rate)


def save_wav(buffer: SampleBuffer, path, bit_depth: int = 16, clamp: bool = True):
    """Write a RIFF/WAVE file, PCM 16-bit or IEEE-float 32-bit.

    With clamp disabled, samples outside [-1, 1] raise instead of wrapping.
    """
    if bit_depth not in (16, 32):
        raise DspError(f"unsupported bit depth {bit_depth}")
    x = buffer.samples
    if len(x) and np.max(np.abs(x)) > 1.0:
        if not clamp:
            raise DspError("sample out of range and clamping is disabled")
        x = np.clip(x, -1.0, 1.0)
    if bit_depth == 16:
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
        scipy.io.wavfile.write(path, buffer.sample_rate, q)
    else:
        scipy.io.wavfile.write(path, buffer.sample_rate, x.astype(np.float32))


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

TAPS_PER_PHASE = 64


@functools.lru_cache(maxsize=32)
def _polyphase_kernel(up: int, down: int) -> np.ndarray:
    """Windowed-sinc anti-alias kernel, 64 taps per phase, unit DC gain
    per polyphase branch."""
    half = TAPS_PER_PHASE * up // 2
    n = np.arange(-half, half + 1, dtype=np.float64)
    cutoff = 1.0 / max(up, down)            # cycles/sample in the upsampled domain x2
    h = cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half + 1, 8.6)
    h *= up
    # normalize each polyphase branch so DC passes exactly
    for p in range(up):
        s = h[p::up].sum()
        if s != 0.0:
            h[p::up] /= s / 1.0
    return h


@functools.lru_cache(maxsize=64)
def resample_matrix(n_in: int, source_rate: int, target_rate: int):
    """Sparse matrix form of the band-limited rate converter.

    The same fixed linear operator backs both waveform resampling and the
    differentiable objective (its transpose is the exact adjoint).
    """
    g = np.gcd(source_rate, target_rate)
    up, down = target_rate // g, source_rate // g
    n_out = int(round(n_in * target_rate / source_rate))
    if up == down:
        return scipy.sparse.identity(n_in, format="csr")
    h = _polyphase_kernel(up, down)
    half = len(h) // 2
    j = np.arange(n_out)
    # output j sits at upsampled-domain position j*down; kernel tap k
    # touches input sample (j*down - (k - half)) / up when divisible
    rows, cols, vals = [], [], []
    for k in range(len(h)):
        if h[k] == 0.0:
            continue
        pos = j * down - (k - half)
        sel = (pos % up == 0)
        i = pos[sel] // up
        inside = (i >= 0) & (i < n_in)
        rows.append(j[sel][inside])
        cols.append(i[inside])
        vals.append(np.full(inside.sum(), h[k]))
    m = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_out, n_in))
    return m.tocsr()


def resample(buffer: SampleBuffer, target_rate: int) -> SampleBuffer:
    """Band-limited rate conversion; output length = round(len * target/source)."""
    if int(target_rate) <= 0:
        raise DspError(f"target rate must be positive, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == buffer.sample_rate:
        return buffer.copy()
    m = resample_matrix(len(buffer), buffer.sample_rate, target_rate)
    return SampleBuffer(m @ buffer.samples, target_rate)


# ---------------------------------------------------------------------------
# STFT / ISTFT
# ---------------------------------------------------------------------------

def get_window(name: str, length: int) -> np.ndarray:
    """Analysis windows. 'hann' is periodic so 50%-overlap OLA sums to one."""
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(length) / length)
    if name == "rect":
        return np.ones(length)
    raise DspError(f"unknown window {name!r}")


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(n_frames, frame_len) view of all fully-contained frames."""
    n = 1 + (len(x) - frame_len) // hop
    if n < 1:
        raise DspError("input shorter than one frame")
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def stft(buffer: SampleBuffer, frame_len: int, hop: int, window: str = "hann",
         fft_len: int | None = None) -> Spectrogram:
    if not 1 <= hop <= frame_len:
        raise DspError("hop must be in [1, frame_len]")
    fft_len = fft_len or frame_len
    if fft_len < frame_len:
        raise DspError("fft_len must be >= frame_len")
    w = get_window(window, frame_len)
    frames = frame_signal(buffer.samples, frame_len, hop) * w
    spec = np.fft.rfft(frames, n=fft_len, axis=1)
    return Spectrogram(spec, frame_len, hop, fft_len, window, buffer.sample_rate)


def istft(spec: Spectrogram) -> SampleBuffer:
    """Least-squares overlap-add inverse; exact in the COLA-valid interior."""
    w = get_window(spec.window, spec.frame_len)
    frames = np.fft.irfft(spec.frames, n=spec.fft_len, axis=1)[:, :spec.frame_len]
    out_len = (spec.n_frames - 1) * spec.hop + spec.frame_len
    num = np.zeros(out_len)
    den = np.zeros(out_len)
    for m in range(spec.n_frames):
        s = m * spec.hop
        num[s:s + spec.frame_len] += w * frames[m]
        den[s:s + spec.frame_len] += w * w
    den[den < 1e-12] = 1.0
    return SampleBuffer(num / den, spec.sample_rate)


# ---------------------------------------------------------------------------
# IIR filters
# ---------------------------------------------------------------------------

def design_butterworth(kind: str, order: int, cutoff_hz, sample_rate: int) -> FilterCascade:
    """Butterworth low-pass or band-pass as second-order sections.

    Designed via bilinear transform with frequency pre-warping, so the -3 dB
    point lands on the requested cutoff.
    """
    if order < 1:
        raise DspError("order must be >= 1")
    nyq = sample_rate / 2.0
    if kind == "lowpass":
        fc = float(cutoff_hz)
        if not 0 < fc < nyq:
            raise DspError(f"cutoff {fc} Hz outside (0, Nyquist)")
        sos = scipy.signal.butter(order, fc, btype="lowpass", fs=sample_rate,
                                  output="sos")
    elif kind == "bandpass":
        lo, hi = (float(c) for c in cutoff_hz)
        if lo >= hi:
            raise DspError("bandpass low edge must be below high edge")
        if not (0 < lo < nyq and 0 < hi < nyq):
            raise DspError("bandpass edges outside (0, Nyquist)")
        sos = scipy.signal.butter(order, [lo, hi], btype="bandpass",
                                  fs=sample_rate, output="sos")
    else:
        raise DspError(f"unknown filter kind {kind!r}")
    sections = np.column_stack([sos[:, 0], sos[:, 1], sos[:, 2], sos[:, 4], sos[:, 5]])
    return FilterCascade(sections)


def apply_filter(cascade: FilterCascade, buffer: SampleBuffer) -> SampleBuffer:
    """Forward (causal) filtering; length-preserving and linear."""
    y = scipy.signal.sosfilt(cascade.as_sos(), buffer.samples)
    return SampleBuffer(y, buffer.sample_rate)


# ---------------------------------------------------------------------------
# Level utilities and mixing
# ---------------------------------------------------------------------------

def rms(buffer: SampleBuffer) -> float:
    if len(buffer) == 0:
        return 0.0
    return float(np.sqrt(np.mean(buffer.samples ** 2)))


def scale_to_rms(buffer: SampleBuffer, target_rms: float) -> SampleBuffer:
    current = rms(buffer)
    if target_rms == 0.0:
        return SampleBuffer(np.zeros(len(buffer)), buffer.sample_rate)
    if current == 0.0:
        raise DspError("cannot scale an all-zero signal to a nonzero RMS")
    return SampleBuffer(buffer.samples * (target_rms / current), buffer.sample_rate)


def mix_at_snr(clean: SampleBuffer, noise: SampleBuffer, snr_db: float,
               rng_seed: int = 0) -> NoisyMixture:
    """Add a randomly-cropped, scaled noise segment at the requested SNR.

    The crop offset is drawn from rng_seed; the noise must be at least as
    long as the clean signal.
    """
    if clean.sample_rate != noise.sample_rate:
        raise DspError("clean and noise sample rates differ")
    if len(noise) < len(clean):
        raise DspError("noise shorter than clean signal")
    rms_clean = rms(clean)
    if rms_clean == 0.0 or len(clean) == 0:
        raise DspError("clean input is silent")
    rng = np.random.default_rng(rng_seed)
    max_off = len(noise) - len(clean)
    off = int(rng.integers(0, max_off + 1)) if max_off > 0 else 0
    seg = noise.samples[off:off + len(clean)]
    rms_noise = float(np.sqrt(np.mean(seg ** 2)))
    if rms_noise == 0.0:
        raise DspError("noise segment has zero power")
    scale = (rms_clean / rms_noise) * 10.0 ** (-snr_db / 20.0)
    scaled = seg * scale
    mixture = clean.samples + scaled
    achieved = 20.0 * np.log10(rms_clean / np.sqrt(np.mean(scaled ** 2)))
    return NoisyMixture(
        clean=clean.copy(),
        noise_segment=SampleBuffer(scaled, clean.sample_rate),
        mixture=SampleBuffer(mixture, clean.sample_rate),
        target_snr_db=float(snr_db),
        achieved_snr_db=float(achieved),
    )


def normalize_zero_mean_unit_var(buffer: SampleBuffer) -> SampleBuffer:
    x = buffer.samples
    sd = np.std(x)
    if sd == 0.0:
        raise DspError("cannot normalize a constant signal")
    return SampleBuffer((x - np.mean(x)) / sd, buffer.sample_rate)
