"""Acceptance gate: one test per contract guarantee, each printing a
single summary line with the measured values and its runtime budget."""
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from easlab import (load_wav, mix_at_snr, save_wav, stoi, train, fcn_model,
                    fcn_forward)
from easlab.cli import run as cli_run
from easlab.dsp import SampleBuffer, design_butterworth, resample, rms
from easlab.evaluation import ccr, paired_t_test_one_tailed
from easlab.listening import create_app
from easlab.mmse import enhance_mmse, mmse_gain
from easlab.nn import Tensor, TrainConfig
from easlab.nn.losses import loss_combined, loss_stoi
from easlab.nn.training import grad_check
from easlab.synth import noise_track, speech_like
from easlab.vocoder import (EasVocoderConfig, acoustic_path,
                            channel_envelopes, vocode_eas)
from oracles import (mmse_gain_quadrature, stoi_reference,
                     t_upper_tail_quadrature)

from conftest import SNR_LADDER


def report(name, budget_s, elapsed_s, detail):
    line = f"[PASS] {name}: {detail} ({elapsed_s:.1f}s < {budget_s:.0f}s)"
    print(line)
    assert elapsed_s < budget_s, line


def test_stoi_self_identity(stoi_pairs):
    t0 = time.perf_counter()
    worst_pos = worst_neg = 0.0
    for clean, _, _ in stoi_pairs:
        worst_pos = max(worst_pos, abs(stoi(clean, clean).value - 1.0))
        flipped = SampleBuffer(-clean.samples, clean.sample_rate)
        worst_neg = max(worst_neg, abs(stoi(clean, flipped).value - 1.0))
    assert worst_pos < 1e-9 and worst_neg < 1e-9, (worst_pos, worst_neg)
    report("stoi self-identity", 5, time.perf_counter() - t0,
           f"max |s-1| = {worst_pos:.2e} (x), {worst_neg:.2e} (-x), 20 fixtures")


def test_stoi_oracle_equivalence(stoi_pairs):
    t0 = time.perf_counter()
    worst = 0.0
    for clean, degraded, _ in stoi_pairs:
        value = stoi(clean, degraded).value
        if clean.sample_rate == 10000:
            oracle = stoi_reference(clean.samples, degraded.samples)
        else:
            c10 = resample(clean, 10000).samples
            d10 = resample(degraded, 10000).samples
            oracle = stoi_reference(c10, d10)
        worst = max(worst, abs(value - oracle))
    assert worst < 1e-6, worst
    report("stoi oracle equivalence", 30, time.perf_counter() - t0,
           f"max |main - brute force| = {worst:.2e}, 20 fixtures, snrs -10..20")


def test_stoi_monotone_in_snr():
    t0 = time.perf_counter()
    worst_drop = 0.0
    for u in range(5):
        clean = speech_like(12800, 16000, rng_seed=600 + u)
        noise = noise_track("white", 40000, 16000, rng_seed=650 + u)
        scores = []
        for snr in SNR_LADDER:
            mix = mix_at_snr(clean, noise, snr, rng_seed=u).mixture
            scores.append(stoi(clean, mix).value)
        steps = np.diff(scores)
        worst_drop = max(worst_drop, float(-steps.min()))
        assert np.all(steps > -0.01), (u, scores)
    report("stoi monotone in snr", 30, time.perf_counter() - t0,
           f"worst step decrease {worst_drop:.4f} <= slack 0.01, 5 utterances x white")


def _loss_pairs(rate, n, seed0):
    pairs = []
    for i in range(n):
        clean = speech_like(rate, rate, rng_seed=seed0 + i)
        noise = noise_track("white", 3 * rate, rate, rng_seed=seed0 + 50 + i)
        noisy = mix_at_snr(clean, noise, 0.0, rng_seed=i).mixture
        pairs.append((noisy, clean))
    return pairs


def test_differentiable_loss_fidelity():
    t0 = time.perf_counter()
    # forward: the loss equals minus the mean of the reference metric
    worst_fwd = 0.0
    for rate in (10000, 16000):
        pairs = _loss_pairs(rate, 4, 900 if rate == 10000 else 950)
        est = [Tensor(n.samples) for n, _ in pairs]
        value = loss_stoi(est, [c for _, c in pairs]).total
        reference = -np.mean([stoi(c, n).value for n, c in pairs])
        worst_fwd = max(worst_fwd, abs(value - reference))
    assert worst_fwd < 1e-6, worst_fwd

    # gradient vs central differences through model + loss, 3 architectures
    pairs = _loss_pairs(10000, 1, 990)
    noisy, clean = pairs[0]
    worst_grad = 0.0
    for arch in ((1, 6, 11), (2, 8, 15), (3, 4, 9)):
        model = fcn_model(n_layers=arch[0], n_channels=arch[1],
                          filter_width=arch[2], rng_seed=arch[0])
        params = model.parameters()

        def loss_fn():
            out = model.forward(Tensor(noisy.samples))
            return loss_stoi([out], [clean]).node

        rel = grad_check(loss_fn, params, n_probes=50, rng_seed=arch[0])
        worst_grad = max(worst_grad, rel)
    assert worst_grad < 1e-4, worst_grad
    report("differentiable loss fidelity", 120, time.perf_counter() - t0,
           f"forward |loss + mean stoi| = {worst_fwd:.2e}; "
           f"grad max rel err {worst_grad:.2e}, 50 probes x 3 architectures")


def test_mmse_gain_and_improvement():
    t0 = time.perf_counter()
    gain_err = abs(mmse_gain(1.0, 1.0) - mmse_gain_quadrature(1.0, 1.0))
    assert gain_err < 1e-6, gain_err
    deltas = []
    for i in range(10):
        clean = speech_like(32000, 16000, rng_seed=40 + i)
        noise = noise_track("white", 104000, 16000, rng_seed=70 + i)
        noisy = mix_at_snr(clean, noise, 0.0, rng_seed=i).mixture
        enhanced = enhance_mmse(noisy)
        deltas.append(stoi(clean, enhanced).value - stoi(clean, noisy).value)
    mean_delta = float(np.mean(deltas))
    assert mean_delta >= 0.0, deltas
    report("mmse gain + improvement", 120, time.perf_counter() - t0,
           f"|gain(1,1) - quadrature| = {gain_err:.2e}; "
           f"mean dSTOI {mean_delta:+.4f} over 10 white fixtures at 0 dB")


def test_toy_fcn_training_beats_noisy():
    t0 = time.perf_counter()
    rate = 10000
    pairs = []
    for i in range(20):
        clean = speech_like(rate, rate, rng_seed=300 + i)
        noise = noise_track("white", 3 * rate, rate, rng_seed=400 + i)
        pairs.append((mix_at_snr(clean, noise, 0.0, rng_seed=i).mixture, clean))
    train_pairs, held = pairs[:15], pairs[15:]

    model = fcn_model(n_layers=3, n_channels=12, filter_width=25, rng_seed=2)
    config = TrainConfig(objective="stoi", learning_rate=3e-3, epochs=50,
                         batch_size=1, rng_seed=2, optimizer="adam")
    result = train(model, train_pairs, config)
    assert result.loss_curve[-1] < result.loss_curve[0], result.loss_curve

    noisy_stoi = np.mean([stoi(c, n).value for n, c in held])
    fcn_stoi = np.mean([stoi(c, fcn_forward(result.model, n)).value
                        for n, c in held])
    assert fcn_stoi >= noisy_stoi + 0.01, (fcn_stoi, noisy_stoi)
    report("toy fcn training", 900, time.perf_counter() - t0,
           f"loss {result.loss_curve[0]:+.4f} -> {result.loss_curve[-1]:+.4f}; "
           f"held-out stoi {fcn_stoi:.4f} vs noisy {noisy_stoi:.4f} "
           f"(+{fcn_stoi - noisy_stoi:.4f} >= 0.01)")


def test_combined_objective_reduction():
    t0 = time.perf_counter()
    # alpha = 0 collapses to the intelligibility loss, bit for bit
    pairs = _loss_pairs(10000, 3, 820)
    est = [Tensor(n.samples) for n, _ in pairs]
    refs = [c for _, c in pairs]
    together = loss_combined([Tensor(n.samples) for n, _ in pairs],
                             refs, alpha=0.0)
    alone = loss_stoi(est, refs)
    assert together.total == -together.components["stoi"] == alone.total

    # huge alpha makes training follow the pure-mse trajectory
    short = pairs[:3]

    def run_training(objective, alpha):
        model = fcn_model(n_layers=2, n_channels=8, filter_width=15, rng_seed=4)
        config = TrainConfig(objective=objective, alpha=alpha,
                             learning_rate=1e-3, epochs=8, batch_size=1,
                             rng_seed=4, optimizer="adam")
        return train(model, short, config)

    combined = run_training("combined", 1e4)
    mse_only = run_training("mse", 0.0)
    corr = float(np.corrcoef(combined.component_curves["mse"],
                             mse_only.component_curves["mse"])[0, 1])
    assert corr > 0.99, corr
    report("combined objective reduction", 600, time.perf_counter() - t0,
           f"alpha=0 exact; alpha=1e4 mse-curve correlation {corr:.6f} > 0.99")


def test_vocoder_conservation_and_selectivity(speech_bank):
    t0 = time.perf_counter()
    worst_rms = 0.0
    for i, clean in enumerate(speech_bank[:20]):
        out = vocode_eas(clean, utterance_id=f"acc{i:02d}")
        worst_rms = max(worst_rms, abs(rms(out) / rms(clean) - 1.0))
    assert worst_rms < 1e-6, worst_rms

    config = EasVocoderConfig()
    centers = [np.sqrt(lo * hi) for lo, hi in config.band_edges_hz]
    t = np.arange(16000) / 16000
    worst_sep = np.inf
    for k, fc in enumerate(centers):
        tone = SampleBuffer(0.3 * np.sin(2 * np.pi * fc * t), 16000)
        env = channel_envelopes(tone, config).matrix
        levels = np.sqrt(np.mean(env[:, 2000:] ** 2, axis=1))
        others = np.delete(levels, k)
        worst_sep = min(worst_sep, float(-20 * np.log10(others / levels[k]).max()))
    assert worst_sep >= 20.0, worst_sep

    lpf = design_butterworth("lowpass", 6, 500.0, 16000)
    atten_db = -20 * np.log10(np.abs(lpf.frequency_response(
        np.array([2000.0]), 16000))[0])
    assert atten_db >= 70.0, atten_db
    report("vocoder conservation + selectivity", 60, time.perf_counter() - t0,
           f"max rms error {worst_rms:.2e}; worst channel separation "
           f"{worst_sep:.1f} dB >= 20; acoustic 2 kHz attenuation {atten_db:.1f} dB >= 70")


def test_ttest_matches_high_precision_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(3, 25))
        a = rng.normal(size=n)
        b = a + rng.normal(loc=rng.uniform(-0.5, 1.0), size=n)
        result = paired_t_test_one_tailed(a, b)
        oracle = t_upper_tail_quadrature(result.t_statistic,
                                         result.degrees_of_freedom)
        worst = max(worst, abs(result.p_value - oracle))
    assert worst < 1e-9, worst

    canonical = paired_t_test_one_tailed([0, 0, 0, 0, 0], [1, 2, 3, 4, 5])
    assert abs(canonical.p_value - 0.00661) <= 1e-5, canonical.p_value
    report("t-test oracle", 5, time.perf_counter() - t0,
           f"max |p - quadrature| = {worst:.2e} over 50 fixtures; "
           f"d=[1..5] p = {canonical.p_value:.8f} within 1e-5 of 0.00661")


def test_cli_outputs_are_bit_deterministic(small_manifest, tmp_path, capsys):
    t0 = time.perf_counter()
    _, manifest_path = small_manifest
    clean = speech_like(12800, 16000, rng_seed=77)
    noise = noise_track("street", 38400, 16000, rng_seed=78)
    cpath, npath = tmp_path / "c.wav", tmp_path / "n.wav"
    save_wav(clean, cpath)
    save_wav(noise, npath)

    def twice(args_fn, out_names):
        outs = []
        for tag in ("one", "two"):
            paths = [tmp_path / f"{tag}_{name}" for name in out_names]
            assert cli_run(args_fn(*[str(p) for p in paths])) == 0
            outs.append([p.read_bytes() for p in paths])
        assert outs[0] == outs[1], out_names

    twice(lambda out: ["mix", str(cpath), str(npath), out,
                       "--snr", "-3", "--seed", "11"], ["mix.wav"])
    twice(lambda out: ["vocode", str(cpath), out, "--utterance-id", "d1",
                       "--rng-seed", "11"], ["voc.wav"])
    twice(lambda out: ["train", "--manifest", str(manifest_path), "--out", out,
                       "--method", "fcn", "--objective", "mse", "--epochs", "1",
                       "--noises", "engine_tr", "--snrs", "0", "--layers", "2",
                       "--channels", "4", "--filter-width", "9", "--seed", "11"],
          ["model.easm"])
    twice(lambda out: ["evaluate", "--manifest", str(manifest_path), "--out", out,
                       "--methods", "noisy,mmse", "--noises", "engine",
                       "--snrs=0", "--seed", "11"], ["table.csv"])
    capsys.readouterr()
    report("cli determinism", 300, time.perf_counter() - t0,
           "mix, vocode, train, evaluate each bit-identical across repeat runs")


def test_session_protocol_end_to_end(listening_manifest, tiny_models,
                                     tmp_path_factory):
    t0 = time.perf_counter()
    manifest, _ = listening_manifest
    models, _ = tiny_models
    store = tmp_path_factory.mktemp("acc_store")
    cache = tmp_path_factory.mktemp("acc_cache")
    app = create_app(manifest, models=models, store_dir=store, cache_dir=cache)

    with TestClient(app) as tc:
        plan = tc.post("/sessions", json={
            "participant_id": "acc", "snr_db": -3.0, "seed": 42,
            "session_id": "acc-session"}).json()
        trials = plan["trials"]
        assert len(trials) == 80

        # 8 x 10 condition partition, no utterance reuse anywhere
        by_condition = {}
        for t in trials:
            by_condition.setdefault((t["noise_id"], t["method"]), []).append(
                t["utterance_id"])
        assert len(by_condition) == 8
        assert all(len(v) == 10 for v in by_condition.values())
        all_utts = [t["utterance_id"] for t in trials]
        assert len(set(all_utts)) == 80

        # two plays pass, the third is refused
        assert tc.get("/sessions/acc-session/trials/0/audio").status_code == 200
        assert tc.get("/sessions/acc-session/trials/0/audio").status_code == 200
        refusal = tc.get("/sessions/acc-session/trials/0/audio")
        assert refusal.status_code == 409
        assert refusal.json() == {"error": "replay_exhausted"}

        transcripts = {u.utterance_id: u.transcript for u in manifest.utterances}
        rng = np.random.default_rng(42)
        for t in trials:
            truth = transcripts[t["utterance_id"]]
            answer = "".join(c if rng.random() < 0.7 else "#" for c in truth)
            assert tc.post("/sessions/acc-session/responses", json={
                "trial_index": t["trial_index"], "response": answer}).status_code == 201

        served = tc.get("/results", params={"session": "acc-session"}).json()

    # recompute every condition from the raw log with the offline scorer
    log_lines = [json.loads(l) for l in
                 (store / "acc-session.jsonl").read_text().splitlines()]
    responses = {r["response"]["trial_index"]: r["response"]["response_characters"]
                 for r in log_lines if r["type"] == "response"}
    assert len(responses) == 80
    recomputed = {}
    for t in trials:
        rec = ccr(transcripts[t["utterance_id"]], responses[t["trial_index"]])
        agg = recomputed.setdefault(f"{t['noise_id']}|{t['method']}", [0, 0])
        agg[0] += rec.correct_characters
        agg[1] += rec.total_characters
    assert set(served["conditions"]) == set(recomputed)
    for cid, (c, total) in recomputed.items():
        cond = served["conditions"][cid]
        assert (cond["correct"], cond["total"]) == (c, total), cid
        assert abs(cond["ccr_percent"] - 100 * c / total) < 1e-12
    report("session protocol", 300, time.perf_counter() - t0,
           "80 trials, 8x10 partition, no reuse, third play refused, "
           "ccrs equal offline scorer on the raw log")
