import numpy as np
import pytest

from easlab import DspError, SampleBuffer, mix_at_snr, stoi
from easlab.nn import (Tensor, grad_check, loss_combined, loss_mse, loss_stoi)
from easlab.nn.models import fcn_model
from easlab.synth import noise_track, speech_like


def _pair(rate, n, seed):
    clean = speech_like(n, rate, rng_seed=seed)
    noise = noise_track("white", 3 * n, rate, rng_seed=seed + 40)
    noisy = mix_at_snr(clean, noise, 0.0, rng_seed=seed + 80).mixture
    return clean, noisy


def test_loss_mse_value_and_gradient():
    clean, noisy = _pair(16000, 12800, 1)
    est = Tensor(noisy.samples.copy(), requires_grad=True)
    value = loss_mse(est, clean)
    assert abs(value.total - np.sum((noisy.samples - clean.samples) ** 2)) < 1e-9
    value.node.backward()
    assert np.allclose(est.grad, 2.0 * (noisy.samples - clean.samples), atol=1e-12)
    with pytest.raises(DspError):
        loss_mse(Tensor(np.zeros(10)), clean)


def test_loss_stoi_forward_matches_negative_metric():
    worst = 0.0
    for seed, rate, n in ((2, 10000, 8000), (3, 16000, 12800)):
        clean, noisy = _pair(rate, n, seed)
        value = loss_stoi([Tensor(noisy.samples)], [clean])
        reference = -stoi(clean, noisy).value
        worst = max(worst, abs(value.total - reference))
    assert worst < 1e-6


def test_loss_stoi_batch_is_mean_over_utterances():
    pairs = [_pair(10000, 8000, s) for s in (4, 5, 6)]
    batch = loss_stoi([Tensor(n.samples) for _, n in pairs],
                      [c for c, _ in pairs])
    singles = [loss_stoi([Tensor(n.samples)], [c]).total for c, n in pairs]
    assert abs(batch.total - np.mean(singles)) < 1e-12


def test_loss_combined_alpha_zero_equals_loss_stoi():
    clean, noisy = _pair(10000, 8000, 7)
    a = loss_combined([Tensor(noisy.samples)], [clean], 0.0)
    b = loss_stoi([Tensor(noisy.samples)], [clean])
    assert a.total == b.total
    assert a.components["stoi"] == b.components["stoi"]


def test_loss_combined_components_and_alpha_weighting():
    clean, noisy = _pair(10000, 8000, 8)
    est = [Tensor(noisy.samples)]
    alpha = 2.5
    value = loss_combined(est, [clean], alpha)
    assert set(value.components) == {"mse", "stoi"}
    expected = alpha * value.components["mse"] - value.components["stoi"]
    assert abs(value.total - expected) < 1e-12
    with pytest.raises(DspError):
        loss_combined(est, [clean], -1.0)


def test_loss_gradients_through_stoi_graph():
    clean, noisy = _pair(10000, 8000, 9)
    est = Tensor(noisy.samples.copy(), requires_grad=True)
    err = grad_check(lambda: loss_stoi([est], [clean]).node, [est],
                     n_probes=30, rng_seed=1)
    assert err < 1e-4, err


def test_loss_gradients_through_model_and_resample():
    # 16 kHz input exercises the rate-conversion operator inside the loss
    clean, noisy = _pair(16000, 12800, 10)
    model = fcn_model(n_layers=2, n_channels=3, filter_width=9, rng_seed=2)

    def loss():
        out = model.forward(Tensor(noisy.samples))
        return loss_combined([out], [clean], 1.0).node

    err = grad_check(loss, model.parameters(), n_probes=30, rng_seed=2)
    assert err < 1e-4, err


def test_non_finite_loss_rejected():
    clean, _ = _pair(10000, 8000, 11)
    bad = Tensor(np.full(len(clean), np.nan))
    with pytest.raises(DspError):
        loss_mse(bad, clean)


def test_loss_batch_length_mismatch():
    clean, noisy = _pair(10000, 8000, 12)
    with pytest.raises(DspError):
        loss_stoi([Tensor(noisy.samples)], [clean, clean])
