"""Independent reference implementations used to cross-check the package.

Everything here is written as plain loops over the defining formulas, on
purpose: no code is shared with the library beyond numpy's FFT, so agreement
is evidence rather than tautology. Slow is fine.
"""
import math

import mpmath as mp
import numpy as np

FS = 10000
FRAME = 256
HOP = 128
NFFT = 512
N_BANDS = 15
BASE_HZ = 150.0
SEG = 30
DYN_DB = 40.0
BETA_DB = -15.0


def _hann(n: int) -> np.ndarray:
    return np.array([0.5 - 0.5 * math.cos(2.0 * math.pi * k / n)
                     for k in range(n)])


def _frames(x: np.ndarray) -> list:
    count = (len(x) - FRAME) // HOP + 1
    return [x[m * HOP:m * HOP + FRAME] for m in range(count)]


def _band_membership() -> list:
    """For each band, the list of FFT bin indices inside [low, high)."""
    bins = []
    for k in range(N_BANDS):
        center = BASE_HZ * 2.0 ** (k / 3.0)
        low, high = center * 2.0 ** (-1 / 6), center * 2.0 ** (1 / 6)
        members = []
        for j in range(NFFT // 2 + 1):
            f = j * FS / NFFT
            if low <= f < high:
                members.append(j)
        bins.append(members)
    return bins


def stoi_reference(clean: np.ndarray, proc: np.ndarray) -> float:
    """Brute-force intelligibility score for 10 kHz signals."""
    w = _hann(FRAME)

    energies = []
    for fr in _frames(clean):
        e = math.sqrt(float(np.sum((fr * w) ** 2)))
        energies.append(20.0 * math.log10(e) if e > 0.0 else -math.inf)
    emax = max(energies)
    keep = [i for i, e in enumerate(energies) if e > emax - DYN_DB]

    def rebuild(x):
        frs = _frames(x)
        out = np.zeros((len(keep) - 1) * HOP + FRAME)
        for pos, i in enumerate(keep):
            out[pos * HOP:pos * HOP + FRAME] += frs[i] * w
        return out

    xr, yr = rebuild(clean), rebuild(proc)

    membership = _band_membership()

    def envelopes(x):
        frs = _frames(x)
        env = np.zeros((N_BANDS, len(frs)))
        for m, fr in enumerate(frs):
            power = np.abs(np.fft.rfft(fr * w, NFFT)) ** 2
            for k in range(N_BANDS):
                total = 0.0
                for j in membership[k]:
                    total += power[j]
                env[k, m] = math.sqrt(total)
        return env

    ex, ey = envelopes(xr), envelopes(yr)
    clip_bound = 1.0 + 10.0 ** (-BETA_DB / 20.0)
    vals = []
    for k in range(N_BANDS):
        for s in range(ex.shape[1] - SEG + 1):
            x = ex[k, s:s + SEG]
            y = ey[k, s:s + SEG].copy()
            alpha = math.sqrt(float(np.sum(x * x)) / float(np.sum(y * y)))
            for i in range(SEG):
                y[i] = min(alpha * y[i], clip_bound * x[i])
            xm = x - x.mean()
            ym = y - y.mean()
            den = math.sqrt(float(np.sum(xm * xm))) * math.sqrt(float(np.sum(ym * ym)))
            vals.append(float(np.sum(xm * ym)) / den)
    return float(np.mean(vals))


def mmse_gain_quadrature(xi: float, gamma: float) -> float:
    """Posterior-mean amplitude gain by direct numerical integration.

    Unit noise power, Gaussian amplitude prior of variance xi, observed
    magnitude sqrt(gamma); the gain is E[A | Y] / |Y|.
    """
    mp.mp.dps = 30
    lam = mp.mpf(xi)
    y_mag = mp.sqrt(mp.mpf(gamma))

    def weight(a):
        return a * mp.e ** (-a * a * (1 / lam + 1)) * mp.besseli(0, 2 * a * y_mag)

    num = mp.quad(lambda a: a * weight(a), [0, mp.inf])
    den = mp.quad(weight, [0, mp.inf])
    return float(num / den / y_mag)


def t_upper_tail_quadrature(t: float, df: int) -> float:
    """P(T >= t) by integrating the Student-t density."""
    mp.mp.dps = 30
    c = mp.gamma((df + 1) / mp.mpf(2)) / (mp.sqrt(df * mp.pi) * mp.gamma(df / mp.mpf(2)))
    return float(mp.quad(lambda u: c * (1 + u * u / df) ** (-(df + 1) / mp.mpf(2)),
                         [t, mp.inf]))


def lfilter_reference(b, a, x) -> np.ndarray:
    """Direct difference-equation evaluation of one IIR section."""
    b = np.asarray(b, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    y = np.zeros(len(x))
    for n in range(len(x)):
        acc = 0.0
        for i in range(len(b)):
            if n - i >= 0:
                acc += b[i] * x[n - i]
        for j in range(1, len(a)):
            if n - j >= 0:
                acc -= a[j] * y[n - j]
        y[n] = acc / a[0]
    return y


def conv1d_reference(x: np.ndarray, weights: np.ndarray,
                     bias: np.ndarray) -> np.ndarray:
    """Same-padded cross-correlation, nested loops."""
    in_c, t_len = x.shape
    out_c, in_c2, width = weights.shape
    assert in_c == in_c2
    pad_l = width // 2
    padded = np.zeros((in_c, t_len + width - 1))
    padded[:, pad_l:pad_l + t_len] = x
    out = np.zeros((out_c, t_len))
    for o in range(out_c):
        for t in range(t_len):
            acc = bias[o]
            for c in range(in_c):
                for f in range(width):
                    acc += weights[o, c, f] * padded[c, t + f]
            out[o, t] = acc
    return out
