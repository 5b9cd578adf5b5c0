import string

import numpy as np
import pytest

from easlab import (Manifest, NoiseEntry, UtteranceEntry, ddae_model,
                    fcn_model, mix_at_snr, save_manifest, save_model,
                    save_wav, train, training_pairs)
from easlab.nn import TrainConfig
from easlab.synth import noise_track, speech_like

SNR_LADDER = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]


@pytest.fixture(scope="session")
def stoi_pairs():
    """20 (clean, degraded, snr) triples: half native 10 kHz, half 16 kHz,
    noise kinds and SNRs cycled across the -10..20 dB ladder."""
    kinds = ["white", "engine", "street"]
    pairs = []
    for i in range(20):
        rate = 10000 if i < 10 else 16000
        n = 8000 if rate == 10000 else 12800
        clean = speech_like(n, rate, rng_seed=50 + i)
        noise = noise_track(kinds[i % 3], 3 * n, rate, rng_seed=150 + i)
        snr = SNR_LADDER[i % len(SNR_LADDER)]
        mix = mix_at_snr(clean, noise, snr, rng_seed=250 + i).mixture
        pairs.append((clean, mix, snr))
    return pairs


@pytest.fixture(scope="session")
def speech_bank():
    return [speech_like(12800, 16000, rng_seed=500 + i) for i in range(25)]


def _write_corpus(root, n_train, n_test, n_samples=11200, rate=16000):
    audio = root / "audio"
    audio.mkdir()
    rng = np.random.default_rng(9)
    utterances = []
    for i in range(n_train + n_test):
        split = "train" if i < n_train else "test"
        speaker = f"{split[:2]}spk{i % 4}"
        utt_id = f"{speaker}_u{i:03d}"
        save_wav(speech_like(n_samples, rate, rng_seed=1000 + i),
                 audio / f"{utt_id}.wav")
        transcript = "".join(rng.choice(list(string.ascii_lowercase), size=10))
        utterances.append(UtteranceEntry(utt_id, str(audio / f"{utt_id}.wav"),
                                         speaker, transcript, split))
    noises = []
    for split, seed_base in (("train", 40), ("test", 60)):
        for j, kind in enumerate(("engine", "street")):
            nid = kind if split == "test" else f"{kind}_tr"
            path = audio / f"{nid}.wav"
            save_wav(noise_track(kind, 4 * n_samples, rate, seed_base + j), path)
            noises.append(NoiseEntry(nid, str(path), split))
    return Manifest(utterances, noises)


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory):
    """4 train + 4 test utterances, a noise pair per split."""
    root = tmp_path_factory.mktemp("small_corpus")
    manifest = _write_corpus(root, 4, 4)
    path = root / "manifest.json"
    save_manifest(manifest, path)
    return manifest, path


@pytest.fixture(scope="session")
def listening_manifest(tmp_path_factory):
    """80 test utterances with 10-character transcripts, for session plans."""
    root = tmp_path_factory.mktemp("listen_corpus")
    manifest = _write_corpus(root, 2, 80)
    path = root / "manifest.json"
    save_manifest(manifest, path)
    return manifest, path


@pytest.fixture(scope="session")
def tiny_models(small_manifest, tmp_path_factory):
    """Briefly trained weights for both learned methods, also saved to disk."""
    manifest, _ = small_manifest
    pairs = training_pairs(manifest, ["engine_tr"], [0.0], seed=5)[:2]
    fcn = train(fcn_model(n_layers=2, n_channels=4, filter_width=9, rng_seed=1),
                pairs, TrainConfig(objective="mse", epochs=1, rng_seed=1)).model
    ddae = train(ddae_model(context=1, hidden_sizes=(16,), rng_seed=1),
                 pairs, TrainConfig(objective="mse", epochs=1, rng_seed=1)).model
    models = {"fcn": fcn, "ddae": ddae}
    model_dir = tmp_path_factory.mktemp("models")
    for name, model in models.items():
        save_model(model, model_dir / f"{name}.easm")
    return models, model_dir
