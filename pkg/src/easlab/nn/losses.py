"""Training objectives: sample-domain MSE, the differentiable intelligibility
score, and their weighted combination.

The intelligibility loss repeats the metric's arithmetic step for step with
autodiff tensors, so its forward value tracks the reference scorer and its
backward pass is the exact analytic gradient of that arithmetic. Two
non-differentiable pieces are held fixed: the silent-frame mask (computed
from the clean reference only) and the rate-conversion operator (a constant
sparse matrix, so its gradient is just the transpose).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dsp import DspError, SampleBuffer, get_window, resample, resample_matrix
from ..stoi import (ENERGY_FLOOR, StoiConfig, silent_frame_mask,
                    third_octave_matrix)
from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class LossValue:
    """Scalar objective plus its per-term breakdown.

    `node` carries the autodiff graph; call node.backward() to get gradients.
    """

    total: float
    components: dict = field(default_factory=dict)
    node: Tensor | None = None

    def __post_init__(self):
        if not np.isfinite(self.total):
            raise DspError("non-finite loss")


def _as_graph_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, SampleBuffer):
        return Tensor(x.samples)
    return Tensor(np.asarray(x, dtype=np.float64))


def loss_mse(estimated, reference: SampleBuffer) -> LossValue:
    """Sum of squared per-sample differences over one utterance."""
    est = _as_graph_tensor(estimated)
    ref = np.asarray(reference.samples if isinstance(reference, SampleBuffer)
                     else reference, dtype=np.float64)
    if est.values.shape != ref.shape:
        raise DspError(f"length mismatch: {est.values.shape} vs {ref.shape}")
    node = ad.tsum((est - ref) ** 2.0)
    return LossValue(node.item(), {"mse": node.item()}, node)


def _stoi_node(estimated: Tensor, reference: SampleBuffer,
               config: StoiConfig) -> Tensor:
    """Differentiable intelligibility of one utterance (scalar tensor).

    Mirrors stoi.stoi(): resample, drop clean-silent frames, band envelopes,
    per-segment normalization + clipping, mean correlation.
    """
    n = estimated.values.shape[0]
    if n != len(reference):
        raise DspError("estimated and reference must have equal length")
    rate = reference.sample_rate

    # fixed linear rate conversion; identical operator to dsp.resample
    if rate != config.eval_rate:
        matrix = resample_matrix(n, rate, config.eval_rate)
        est10 = ad.sparse_matmul(matrix, estimated)
    else:
        est10 = estimated
    ref10 = resample(reference, config.eval_rate)

    mask = silent_frame_mask(ref10.samples, config)
    if not mask.any():
        raise DspError("no frames survive silence removal")
    keep = np.flatnonzero(mask)
    w = get_window("hann", config.frame_len)

    def masked_ola(sig: Tensor) -> Tensor:
        frames = ad.unfold(sig, config.frame_len, config.hop)
        kept = ad.index_rows(frames, keep) * w
        return ad.fold(kept, config.hop,
                       (len(keep) - 1) * config.hop + config.frame_len)

    est_m = masked_ola(est10)
    ref_m = masked_ola(Tensor(ref10.samples)).values

    bands = third_octave_matrix(config)
    cos_m, sin_m = ad.dft_matrices(config.frame_len, config.fft_len)

    def envelopes(sig) -> Tensor:
        frames = ad.unfold(ad.as_tensor(sig), config.frame_len, config.hop) * w
        re = ad.matmul(frames, cos_m)
        im = ad.matmul(frames, sin_m)
        power = re * re + im * im                      # (n_frames, n_bins)
        band_power = ad.matmul(power, bands.weights.T)
        return ad.transpose(ad.sqrt(band_power))       # (n_bands, n_frames)

    env_p = envelopes(est_m)
    env_c = envelopes(ref_m).values
    n_frames = env_c.shape[1]
    if n_frames < config.segment_frames:
        raise DspError(f"only {n_frames} frames after silence removal; "
                       f"need >= {config.segment_frames}")
    clip_gain = 10.0 ** (-config.clip_beta_db / 20.0)

    x = np.lib.stride_tricks.sliding_window_view(env_c, config.segment_frames,
                                                 axis=1)
    y = ad.unfold(env_p, config.segment_frames, 1)     # (bands, segs, N)

    sum_x2 = np.sum(x ** 2, axis=2, keepdims=True)
    sum_y2 = ad.tsum(y * y, axis=2, keepdims=True)
    alpha = ad.sqrt(sum_x2 / ad.maximum(sum_y2, ENERGY_FLOOR))
    # clip ties route the gradient to the trainable side
    y = ad.minimum(alpha * y, x * (1.0 + clip_gain))

    xc = x - x.mean(axis=2, keepdims=True)
    yc = y - ad.tmean(y, axis=2, keepdims=True)
    denom = np.sqrt(np.sum(xc ** 2, axis=2)) * ad.sqrt(ad.tsum(yc * yc, axis=2))
    num = ad.tsum(xc * yc, axis=2)
    corr = num / ad.maximum(denom, ENERGY_FLOOR)
    return ad.tmean(corr)


def _batch_lists(estimated_batch, reference_batch):
    if len(estimated_batch) != len(reference_batch) or not estimated_batch:
        raise DspError("batches must be nonempty and equal length")
    return [_as_graph_tensor(e) for e in estimated_batch], list(reference_batch)


def _combined_node(estimated_batch, reference_batch, alpha: float,
                   config: StoiConfig):
    """(1/U) * sum_u [ (alpha/L_u) * sse_u - stoi_u ], plus term breakdowns."""
    ests, refs = _batch_lists(estimated_batch, reference_batch)
    terms, mse_vals, stoi_vals = [], [], []
    for est, ref in zip(ests, refs):
        length = len(ref)
        stoi_u = _stoi_node(est, ref, config)
        sse_u = ad.tsum((est - ref.samples) ** 2.0)
        terms.append((alpha / length) * sse_u - stoi_u)
        mse_vals.append(sse_u.item() / length)
        stoi_vals.append(stoi_u.item())
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    node = acc / float(len(terms))
    components = {"mse": float(np.mean(mse_vals)),
                  "stoi": float(np.mean(stoi_vals))}
    return node, components


def loss_stoi(estimated_batch, reference_batch,
              config: StoiConfig = StoiConfig()) -> LossValue:
    """Negative mean intelligibility over the batch, differentiable end to end."""
    node, components = _combined_node(estimated_batch, reference_batch, 0.0, config)
    return LossValue(node.item(), components, node)


def loss_combined(estimated_batch, reference_batch, alpha: float,
                  config: StoiConfig = StoiConfig()) -> LossValue:
    """Reconstruction error weighted by alpha minus mean intelligibility."""
    if alpha < 0:
        raise DspError("alpha must be >= 0")
    node, components = _combined_node(estimated_batch, reference_batch,
                                      float(alpha), config)
    return LossValue(node.item(), components, node)
