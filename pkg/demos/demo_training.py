"""Training a waveform network directly on the intelligibility score.

The loss is differentiable end to end: waveform in, band envelopes,
per-segment correlation, one scalar out. Ten epochs on fifteen noisy
utterances already lifts held-out intelligibility above the unprocessed
mixtures.
"""
import numpy as np

from easlab import fcn_forward, fcn_model, mix_at_snr, stoi, train
from easlab.nn import TrainConfig
from easlab.synth import noise_track, speech_like

RATE = 10000
pairs = []
for i in range(20):
    clean = speech_like(RATE, RATE, rng_seed=300 + i)
    noise = noise_track("white", 3 * RATE, RATE, rng_seed=400 + i)
    pairs.append((mix_at_snr(clean, noise, 0.0, rng_seed=i).mixture, clean))
train_pairs, held_out = pairs[:15], pairs[15:]

model = fcn_model(n_layers=3, n_channels=12, filter_width=25, rng_seed=2)
config = TrainConfig(objective="stoi", learning_rate=3e-3, epochs=10,
                     batch_size=1, rng_seed=2, optimizer="adam")

print("training a 3-layer fcn on 15 utterances, white noise at 0 dB")
result = train(model, train_pairs, config)
for epoch, loss in enumerate(result.loss_curve, 1):
    print(f"  epoch {epoch:>2}  loss {loss:+.4f}  (mean stoi {-loss:.4f})")

noisy_scores = [stoi(c, n).value for n, c in held_out]
enhanced_scores = [stoi(c, fcn_forward(result.model, n)).value
                   for n, c in held_out]
print()
print("held-out utterances the model never saw:")
print(f"  mean stoi noisy     {np.mean(noisy_scores):.4f}")
print(f"  mean stoi enhanced  {np.mean(enhanced_scores):.4f}  "
      f"(delta {np.mean(enhanced_scores) - np.mean(noisy_scores):+.4f})")
