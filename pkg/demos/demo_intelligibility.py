"""How the intelligibility metric behaves as noise drowns out speech.

Synthesizes one utterance, buries it in white noise at a ladder of SNRs,
and scores each mixture against the clean reference. Along the way it
shows the two invariances a correlation-based metric must have: scaling
and sign flips change nothing.
"""
import numpy as np

from easlab import SampleBuffer, mix_at_snr, stoi
from easlab.synth import noise_track, speech_like

clean = speech_like(16000, 16000, rng_seed=1)
noise = noise_track("white", 48000, 16000, rng_seed=2)

print("intelligibility vs SNR (white noise)")
print(f"{'snr_db':>8}  {'stoi':>8}")
for snr in (-10, -5, 0, 5, 10, 15, 20):
    mixture = mix_at_snr(clean, noise, snr, rng_seed=3).mixture
    print(f"{snr:>8}  {stoi(clean, mixture).value:8.4f}")

print()
score = stoi(clean, clean).value
print(f"identity:        stoi(x, x)      = {score:.12f}")
half = SampleBuffer(0.5 * clean.samples, 16000)
print(f"scale invariant: stoi(x, x/2)    = {stoi(clean, half).value:.12f}")
flipped = SampleBuffer(-clean.samples, 16000)
print(f"sign invariant:  stoi(x, -x)     = {stoi(clean, flipped).value:.12f}")
