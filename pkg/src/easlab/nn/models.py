"""Learned enhancers: waveform FCN and spectral DDAE, plus weight-file I/O."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..dsp import SampleBuffer, Spectrogram, istft, stft
from . import autodiff as ad
from .autodiff import Tensor

WEIGHTS_FORMAT_VERSION = 1
_MAGIC = b"EASM"

_ACTIVATIONS = ("tanh", "linear")


@dataclass
class ConvLayer:
    """One 1-D convolution: weights (out_c, in_c, width), bias (out_c,)."""

    weights: Tensor
    bias: Tensor
    activation: str = "tanh"

    def __post_init__(self):
        if self.weights.values.ndim != 3:
            raise ValueError("conv weights must be (out_c, in_c, width)")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def out_channels(self) -> int:
        return self.weights.values.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.values.shape[1]

    @property
    def filter_width(self) -> int:
        return self.weights.values.shape[2]

    def __call__(self, x: Tensor) -> Tensor:
        out = ad.conv1d(x, self.weights, self.bias)
        if self.activation == "tanh":
            out = ad.tanh(out)
        return out


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class FcnModel:
    """Stack of same-padded 1-D convolutions mapping waveform to waveform.

    Hidden layers use tanh; the last layer is a single linear filter, so the
    model accepts input of any length and preserves it.
    """

    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("model needs at least one layer")
        if self.layers[0].in_channels != 1:
            raise ValueError("first layer must take one input channel")
        last = self.layers[-1]
        if last.out_channels != 1 or last.activation != "linear":
            raise ValueError("last layer must be a single linear filter")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.in_channels != prev.out_channels:
                raise ValueError("layer channel counts do not chain")

    def parameters(self) -> list:
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params

    def forward(self, x: Tensor) -> Tensor:
        """x: (T,) waveform tensor -> (T,) waveform tensor."""
        h = ad.reshape(x, (1, x.values.shape[0]))
        for layer in self.layers:
            h = layer(h)
        return ad.reshape(h, (h.values.shape[1],))

    def descriptor(self) -> dict:
        return {
            "kind": "fcn",
            "layers": [
                {
                    "out_channels": l.out_channels,
                    "in_channels": l.in_channels,
                    "filter_width": l.filter_width,
                    "activation": l.activation,
                }
                for l in self.layers
            ],
        }


def fcn_model(n_layers: int = 8, n_channels: int = 30, filter_width: int = 55,
              rng_seed: int = 0) -> FcnModel:
    """Seeded FCN with tanh hidden layers and a single linear output filter."""
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    rng = np.random.default_rng(rng_seed)
    layers = []
    in_c = 1
    for i in range(n_layers):
        last = i == n_layers - 1
        out_c = 1 if last else n_channels
        fan_in, fan_out = in_c * filter_width, out_c * filter_width
        w = Tensor(_glorot_uniform(rng, (out_c, in_c, filter_width), fan_in, fan_out),
                   requires_grad=True)
        b = Tensor(np.zeros(out_c), requires_grad=True)
        layers.append(ConvLayer(w, b, "linear" if last else "tanh"))
        in_c = out_c
    return FcnModel(layers)


def fcn_forward(model: FcnModel, noisy: SampleBuffer) -> SampleBuffer:
    """Enhance a waveform; output has the same length and rate as the input."""
    if len(noisy) == 0:
        raise ValueError("empty input")
    out = model.forward(Tensor(noisy.samples))
    return SampleBuffer(out.values, noisy.sample_rate)


# -- DDAE ----------------------------------------------------------------

DDAE_FRAME_LEN = 512
DDAE_HOP = 128  # matches the spectral baseline: 75% overlap keeps the rebuild artifact-free
_LOG_FLOOR = 1e-12


@dataclass
class DenseLayer:
    weights: Tensor  # (out_dim, in_dim)
    bias: Tensor  # (out_dim,)
    activation: str = "tanh"

    def __call__(self, x: Tensor) -> Tensor:
        # x: (n_frames, in_dim)
        out = ad.matmul(x, ad.transpose(self.weights)) + ad.reshape(
            self.bias, (1, self.bias.values.shape[0]))
        if self.activation == "tanh":
            out = ad.tanh(out)
        return out


@dataclass
class DdaeModel:
    """Dense net mapping context-stacked log-power frames to clean log-power frames.

    input_mean/input_std standardize the stacked features; target_mean/target_std
    undo the same transform on the predicted clean frame.
    """

    layers: list
    context: int
    n_bins: int
    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray
    frame_len: int = DDAE_FRAME_LEN
    hop: int = DDAE_HOP

    def __post_init__(self):
        width = (2 * self.context + 1) * self.n_bins
        if self.layers[0].weights.values.shape[1] != width:
            raise ValueError("first layer width must match stacked context")
        if self.layers[-1].weights.values.shape[0] != self.n_bins:
            raise ValueError("last layer must emit one spectral frame")
        if self.input_mean.shape != (width,) or self.input_std.shape != (width,):
            raise ValueError("input standardization shape mismatch")
        if self.target_mean.shape != (self.n_bins,) or self.target_std.shape != (self.n_bins,):
            raise ValueError("target standardization shape mismatch")

    def parameters(self) -> list:
        params = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params

    def forward(self, stacked: Tensor) -> Tensor:
        """stacked: (n_frames, (2c+1)*n_bins) standardized -> (n_frames, n_bins) standardized."""
        h = stacked
        for layer in self.layers:
            h = layer(h)
        return h

    def descriptor(self) -> dict:
        return {
            "kind": "ddae",
            "context": self.context,
            "n_bins": self.n_bins,
            "frame_len": self.frame_len,
            "hop": self.hop,
            "layers": [
                {
                    "out_dim": l.weights.values.shape[0],
                    "in_dim": l.weights.values.shape[1],
                    "activation": l.activation,
                }
                for l in self.layers
            ],
        }


def ddae_model(context: int = 2, n_bins: int = DDAE_FRAME_LEN // 2 + 1,
               hidden_sizes=(256, 256), rng_seed: int = 0) -> DdaeModel:
    rng = np.random.default_rng(rng_seed)
    width = (2 * context + 1) * n_bins
    sizes = [width, *hidden_sizes, n_bins]
    layers = []
    for i, (d_in, d_out) in enumerate(zip(sizes, sizes[1:])):
        w = Tensor(_glorot_uniform(rng, (d_out, d_in), d_in, d_out), requires_grad=True)
        b = Tensor(np.zeros(d_out), requires_grad=True)
        last = i == len(sizes) - 2
        layers.append(DenseLayer(w, b, "linear" if last else "tanh"))
    return DdaeModel(layers, context, n_bins,
                     np.zeros(width), np.ones(width),
                     np.zeros(n_bins), np.ones(n_bins))


def ddae_identity_model(context: int = 2, n_bins: int = DDAE_FRAME_LEN // 2 + 1) -> DdaeModel:
    """Single linear layer that copies the center frame out of the context stack."""
    width = (2 * context + 1) * n_bins
    w = np.zeros((n_bins, width))
    start = context * n_bins
    w[np.arange(n_bins), start + np.arange(n_bins)] = 1.0
    layers = [DenseLayer(Tensor(w, requires_grad=True),
                         Tensor(np.zeros(n_bins), requires_grad=True), "linear")]
    return DdaeModel(layers, context, n_bins,
                     np.zeros(width), np.ones(width),
                     np.zeros(n_bins), np.ones(n_bins))


def log_power_frames(buffer: SampleBuffer, frame_len: int = DDAE_FRAME_LEN,
                     hop: int = DDAE_HOP):
    """(log |Y|^2 frames, phase frames), zero-padded one frame at each end.

    The symmetric pad keeps every real sample under full window overlap, so
    a later least-squares rebuild of modified frames stays stable at the
    signal edges.
    """
    pad = np.zeros(frame_len, dtype=np.float64)
    padded = SampleBuffer(np.concatenate([pad, buffer.samples, pad]),
                          buffer.sample_rate)
    spec = stft(padded, frame_len, hop)
    power = np.abs(spec.frames) ** 2
    return np.log(np.maximum(power, _LOG_FLOOR)), np.angle(spec.frames)


def stack_context(features: np.ndarray, context: int) -> np.ndarray:
    """(n_frames, d) -> (n_frames, (2c+1)*d) with edge frames repeated."""
    n = features.shape[0]
    idx = np.arange(n)[:, None] + np.arange(-context, context + 1)[None, :]
    idx = np.clip(idx, 0, n - 1)
    return features[idx].reshape(n, -1)


def ddae_enhance(model: DdaeModel, noisy: SampleBuffer) -> SampleBuffer:
    """Map log-power frames to enhanced spectra, rebuild with the noisy phase."""
    if len(noisy) == 0:
        raise ValueError("empty input")
    if len(noisy) < model.frame_len:
        raise ValueError("input shorter than one frame")
    logps, phase = log_power_frames(noisy, model.frame_len, model.hop)
    stacked = stack_context(logps, model.context)
    stdized = (stacked - model.input_mean) / model.input_std
    pred = model.forward(Tensor(stdized)).values
    log_clean = pred * model.target_std + model.target_mean
    magnitude = np.exp(0.5 * log_clean)  # sqrt of the power spectrum, never negative
    frames = magnitude * np.exp(1j * phase)
    spec = Spectrogram(frames, model.frame_len, model.hop, model.frame_len,
                       "hann", noisy.sample_rate)
    rebuilt = istft(spec)
    return SampleBuffer(rebuilt.samples[model.frame_len:model.frame_len + len(noisy)],
                        noisy.sample_rate)


# -- weights file --------------------------------------------------------


def _model_tensors(model):
    arrays = [p.values for p in model.parameters()]
    if isinstance(model, DdaeModel):
        arrays += [model.input_mean, model.input_std,
                   model.target_mean, model.target_std]
    return arrays


def save_model(model, path) -> None:
    """Binary weights: magic, format version, JSON descriptor, raw float64 LE."""
    desc = json.dumps(model.descriptor(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", WEIGHTS_FORMAT_VERSION))
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        for arr in _model_tensors(model):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a model weights file")
        version = struct.unpack("<I", fh.read(4))[0]
        if version != WEIGHTS_FORMAT_VERSION:
            raise ValueError(f"unsupported weights format version {version}")
        desc = json.loads(fh.read(struct.unpack("<I", fh.read(4))[0]))
        raw = fh.read()

    def take(shape, offset):
        n = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=offset)
        return arr.reshape(shape).astype(np.float64), offset + 8 * n

    offset = 0
    if desc["kind"] == "fcn":
        layers = []
        for spec_l in desc["layers"]:
            shape = (spec_l["out_channels"], spec_l["in_channels"], spec_l["filter_width"])
            w, offset = take(shape, offset)
            b, offset = take((spec_l["out_channels"],), offset)
            layers.append(ConvLayer(Tensor(w, requires_grad=True),
                                    Tensor(b, requires_grad=True),
                                    spec_l["activation"]))
        return FcnModel(layers)
    if desc["kind"] == "ddae":
        layers = []
        for spec_l in desc["layers"]:
            w, offset = take((spec_l["out_dim"], spec_l["in_dim"]), offset)
            b, offset = take((spec_l["out_dim"],), offset)
            layers.append(DenseLayer(Tensor(w, requires_grad=True),
                                     Tensor(b, requires_grad=True),
                                     spec_l["activation"]))
        n_bins, context = desc["n_bins"], desc["context"]
        width = (2 * context + 1) * n_bins
        in_mean, offset = take((width,), offset)
        in_std, offset = take((width,), offset)
        t_mean, offset = take((n_bins,), offset)
        t_std, offset = take((n_bins,), offset)
        return DdaeModel(layers, context, n_bins, in_mean, in_std, t_mean, t_std,
                         desc["frame_len"], desc["hop"])
    raise ValueError(f"unknown model kind {desc['kind']!r}")
