"""Utterance-based training for the waveform and spectral enhancers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dsp import DspError
from ..stoi import StoiConfig
from . import autodiff as ad
from .autodiff import Tensor
from .losses import _combined_node
from .models import DdaeModel, FcnModel, log_power_frames, stack_context

_OBJECTIVES = ("mse", "stoi", "combined")
_OPTIMIZERS = ("sgd", "adam")


class TrainingDivergedError(DspError):
    """Loss became non-finite mid-run."""


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "combined"
    alpha: float = 10.0
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 1
    rng_seed: int = 0
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.objective not in _OBJECTIVES:
            raise DspError(f"objective must be one of {_OBJECTIVES}")
        if self.optimizer not in _OPTIMIZERS:
            raise DspError(f"optimizer must be one of {_OPTIMIZERS}")
        if self.alpha < 0:
            raise DspError("alpha must be >= 0")
        if self.learning_rate < 0:
            raise DspError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise DspError("epochs and batch_size must be >= 1")


@dataclass
class TrainResult:
    model: object
    loss_curve: list        # per-epoch mean batch loss
    component_curves: dict  # per-epoch means of the loss terms


class Sgd:
    def __init__(self, params, learning_rate):
        self.params = params
        self.learning_rate = learning_rate

    def step(self):
        for p in self.params:
            p.values -= self.learning_rate * p.grad


class Adam:
    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.values) for p in params]
        self.v = [np.zeros_like(p.values) for p in params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * p.grad ** 2
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p.values -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(params, config: TrainConfig):
    if config.optimizer == "sgd":
        return Sgd(params, config.learning_rate)
    return Adam(params, config.learning_rate,
                config.adam_beta1, config.adam_beta2, config.adam_eps)


def _validate_dataset(dataset):
    if not dataset:
        raise DspError("dataset is empty")
    for noisy, clean in dataset:
        if len(noisy) != len(clean) or noisy.sample_rate != clean.sample_rate:
            raise DspError("noisy/clean pairs must share length and rate")


def _fit_ddae_standardization(model: DdaeModel, dataset):
    """Feature and target statistics from the training set, stored on the model."""
    stacked_all, targets_all = [], []
    for noisy, clean in dataset:
        logps_n, _ = log_power_frames(noisy, model.frame_len, model.hop)
        logps_c, _ = log_power_frames(clean, model.frame_len, model.hop)
        stacked_all.append(stack_context(logps_n, model.context))
        targets_all.append(logps_c)
    stacked = np.concatenate(stacked_all)
    targets = np.concatenate(targets_all)
    model.input_mean = stacked.mean(axis=0)
    model.input_std = np.maximum(stacked.std(axis=0), 1e-8)
    model.target_mean = targets.mean(axis=0)
    model.target_std = np.maximum(targets.std(axis=0), 1e-8)


def _ddae_features(model: DdaeModel, dataset):
    """Standardized (input, target) feature pairs, one per utterance."""
    pairs = []
    for noisy, clean in dataset:
        logps_n, _ = log_power_frames(noisy, model.frame_len, model.hop)
        logps_c, _ = log_power_frames(clean, model.frame_len, model.hop)
        x = (stack_context(logps_n, model.context) - model.input_mean) / model.input_std
        t = (logps_c - model.target_mean) / model.target_std
        pairs.append((x, t))
    return pairs


def _fcn_batch_node(model: FcnModel, batch, config: TrainConfig,
                    stoi_config: StoiConfig):
    ests = [model.forward(Tensor(noisy.samples)) for noisy, _ in batch]
    refs = [clean for _, clean in batch]
    if config.objective == "mse":
        terms = [ad.tsum((e - r.samples) ** 2.0) / float(len(r))
                 for e, r in zip(ests, refs)]
        acc = terms[0]
        for t in terms[1:]:
            acc = acc + t
        node = acc / float(len(terms))
        return node, {"mse": node.item()}
    alpha = config.alpha if config.objective == "combined" else 0.0
    return _combined_node(ests, refs, alpha, stoi_config)


def _ddae_batch_node(model: DdaeModel, feature_batch):
    terms = []
    for x, target in feature_batch:
        pred = model.forward(Tensor(x))
        terms.append(ad.tmean((pred - target) ** 2.0))
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    node = acc / float(len(terms))
    return node, {"mse": node.item()}


def train(model, dataset, config: TrainConfig = TrainConfig(),
          stoi_config: StoiConfig = StoiConfig()) -> TrainResult:
    """Optimize the model on (noisy, clean) utterance pairs.

    Deterministic for a fixed config.rng_seed: the shuffle order, and hence
    every parameter update, repeats bit for bit.
    """
    _validate_dataset(dataset)
    is_ddae = isinstance(model, DdaeModel)
    if is_ddae and config.objective != "mse":
        raise DspError("the spectral model trains with the mse objective only")
    params = model.parameters()
    optimizer = _make_optimizer(params, config)
    rng = np.random.default_rng(config.rng_seed)

    features = None
    if is_ddae:
        _fit_ddae_standardization(model, dataset)
        features = _ddae_features(model, dataset)

    loss_curve = []
    component_curves: dict = {}
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_losses, epoch_components = [], []
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            if is_ddae:
                node, comps = _ddae_batch_node(model, [features[i] for i in idx])
            else:
                node, comps = _fcn_batch_node(model, [dataset[i] for i in idx],
                                              config, stoi_config)
            if not np.isfinite(node.item()):
                raise TrainingDivergedError(
                    f"loss non-finite at epoch {epoch}, step {start // config.batch_size}")
            node.backward()
            optimizer.step()
            epoch_losses.append(node.item())
            epoch_components.append(comps)
        loss_curve.append(float(np.mean(epoch_losses)))
        for key in epoch_components[0]:
            component_curves.setdefault(key, []).append(
                float(np.mean([c[key] for c in epoch_components])))
    return TrainResult(model, loss_curve, component_curves)


def grad_check(loss_fn, tensors, epsilon: float = 1e-4, n_probes: int = 50,
               rng_seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn rebuilds the scalar loss from the current tensor values; tensors
    lists the leaves to probe (weights, biases, or a signal).
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise DspError("epsilon must lie in [1e-6, 1e-3]")
    node = loss_fn()
    node.backward()
    analytic = [t.grad.copy() for t in tensors]
    # coordinates far below a tensor's gradient scale carry only difference-
    # quotient round-off; compare those against the scale, not themselves
    floors = [max(1e-4 * np.max(np.abs(a)), 1e-12) for a in analytic]
    rng = np.random.default_rng(rng_seed)
    max_rel = 0.0
    for _ in range(n_probes):
        ti = int(rng.integers(len(tensors)))
        tensor = tensors[ti]
        flat = int(rng.integers(tensor.values.size))
        idx = np.unravel_index(flat, tensor.values.shape)
        original = tensor.values[idx]
        tensor.values[idx] = original + epsilon
        f_plus = loss_fn().item()
        tensor.values[idx] = original - epsilon
        f_minus = loss_fn().item()
        tensor.values[idx] = original
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        a = analytic[ti][idx]
        scale = max(abs(a), abs(numeric), floors[ti])
        max_rel = max(max_rel, abs(a - numeric) / scale)
    return max_rel
