"""Corpus bookkeeping, batch intelligibility scoring, character correct
rates, and matched-pair significance testing."""
from __future__ import annotations

import collections
import hashlib
import json
import pathlib
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.special

from .dsp import DspError, load_wav, mix_at_snr
from .mmse import enhance_mmse
from .nn import ddae_enhance, fcn_forward
from .stoi import StoiConfig, stoi

REPORT_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UtteranceEntry:
    utterance_id: str
    wav_path: str
    speaker_id: str
    transcript: str
    split: str  # train | test


@dataclass(frozen=True)
class NoiseEntry:
    noise_id: str
    wav_path: str
    split: str


@dataclass
class Manifest:
    utterances: list = field(default_factory=list)
    noises: list = field(default_factory=list)

    def __post_init__(self):
        ids = [u.utterance_id for u in self.utterances]
        if len(set(ids)) != len(ids):
            dup = [i for i, c in collections.Counter(ids).items() if c > 1]
            raise DspError(f"duplicate utterance ids: {dup}")
        for entry in [*self.utterances, *self.noises]:
            if entry.split not in ("train", "test"):
                raise DspError(f"split must be train|test, got {entry.split!r}")
        speakers = {"train": set(), "test": set()}
        for u in self.utterances:
            speakers[u.split].add(u.speaker_id)
        if speakers["train"] & speakers["test"]:
            raise DspError(f"speakers in both splits: {speakers['train'] & speakers['test']}")
        noise_ids = {"train": set(), "test": set()}
        for n in self.noises:
            noise_ids[n.split].add(n.noise_id)
        if noise_ids["train"] & noise_ids["test"]:
            raise DspError(f"noises in both splits: {noise_ids['train'] & noise_ids['test']}")

    def split_utterances(self, split: str) -> list:
        return [u for u in self.utterances if u.split == split]

    def split_noises(self, split: str) -> list:
        return [n for n in self.noises if n.split == split]

    def noise(self, noise_id: str, split: str = "test") -> NoiseEntry:
        for n in self.noises:
            if n.noise_id == noise_id and n.split == split:
                return n
        raise DspError(f"no {split} noise {noise_id!r} in manifest")

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": REPORT_SCHEMA_VERSION,
            "utterances": [asdict(u) for u in self.utterances],
            "noises": [asdict(n) for n in self.noises],
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        data = json.loads(text)
        return cls([UtteranceEntry(**u) for u in data["utterances"]],
                   [NoiseEntry(**n) for n in data["noises"]])


def save_manifest(manifest: Manifest, path) -> None:
    pathlib.Path(path).write_text(manifest.to_json())


def load_manifest(path) -> Manifest:
    return Manifest.from_json(pathlib.Path(path).read_text())


def build_manifest(audio_dir, transcript_file, split_rules: dict) -> Manifest:
    """Scan a directory of <speaker>_<utterance>.wav files into a manifest.

    transcript_file: TSV of "utterance_id<TAB>transcript" lines.
    split_rules: {"train_speakers": [...], "test_speakers": [...],
                  "train_noises": {id: wav}, "test_noises": {id: wav}}.
    """
    audio_dir = pathlib.Path(audio_dir)
    wavs = sorted(audio_dir.glob("*.wav"))
    if not wavs:
        raise DspError(f"no wav files in {audio_dir}")
    transcripts = {}
    for line in pathlib.Path(transcript_file).read_text().splitlines():
        if not line.strip():
            continue
        utt_id, _, text = line.partition("\t")
        transcripts[utt_id] = text
    train = set(split_rules.get("train_speakers", []))
    test = set(split_rules.get("test_speakers", []))
    utterances = []
    for wav in wavs:
        utt_id = wav.stem
        if utt_id not in transcripts:
            raise DspError(f"missing transcript for {utt_id}")
        speaker = utt_id.split("_")[0]
        if speaker in train:
            split = "train"
        elif speaker in test:
            split = "test"
        else:
            raise DspError(f"speaker {speaker!r} assigned to no split")
        utterances.append(UtteranceEntry(utt_id, str(wav), speaker,
                                         transcripts[utt_id], split))
    noises = [NoiseEntry(nid, str(p), split)
              for split, key in (("train", "train_noises"), ("test", "test_noises"))
              for nid, p in sorted(split_rules.get(key, {}).items())]
    return Manifest(utterances, noises)


# ---------------------------------------------------------------------------
# Batch evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreCell:
    mean_stoi: float
    n_utterances: int

    def __post_init__(self):
        if not -1.0 <= self.mean_stoi <= 1.0 or self.n_utterances <= 0:
            raise DspError("cell mean must lie in [-1, 1] with n > 0")


@dataclass
class ScoreTable:
    """Cells keyed (noise_id, snr_db, method)."""

    cells: dict = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, ScoreTable) and self.cells == other.cells


def condition_seed(base_seed: int, utterance_id: str, noise_id: str,
                   snr_db: float) -> int:
    """Stable per-condition sub-seed, independent of evaluation order."""
    key = f"{base_seed}|{utterance_id}|{noise_id}|{snr_db}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def method_registry(models: dict | None = None) -> dict:
    """Name -> enhancer callable. Learned methods need entries in `models`."""
    models = models or {}
    registry = {"noisy": lambda buf: buf, "mmse": enhance_mmse}
    if "ddae" in models:
        registry["ddae"] = lambda buf: ddae_enhance(models["ddae"], buf)
    if "fcn" in models:
        registry["fcn"] = lambda buf: fcn_forward(models["fcn"], buf)
    return registry


def evaluate_corpus(manifest: Manifest, methods: list, noises: list,
                    snrs_db: list, seed: int, models: dict | None = None,
                    stoi_config: StoiConfig = StoiConfig()) -> ScoreTable:
    """Mean intelligibility per (noise, SNR, method) over the test split.

    Deterministic for a fixed seed: each mixture's noise crop comes from a
    sub-seed hashed out of (seed, utterance, noise, SNR), so reordering
    methods or conditions cannot change any cell.
    """
    registry = method_registry(models)
    for m in methods:
        if m not in registry:
            if m in ("ddae", "fcn"):
                raise DspError(f"method {m!r} needs a model (none supplied)")
            raise DspError(f"unknown method {m!r}")
    test_utts = manifest.split_utterances("test")
    if not test_utts:
        raise DspError("manifest has no test utterances")

    noise_bufs = {nid: load_wav(manifest.noise(nid).wav_path) for nid in noises}
    scores = collections.defaultdict(list)
    for utt in test_utts:
        clean = load_wav(utt.wav_path)
        for noise_id in noises:
            for snr in snrs_db:
                sub = condition_seed(seed, utt.utterance_id, noise_id, snr)
                mixture = mix_at_snr(clean, noise_bufs[noise_id], snr,
                                     rng_seed=sub).mixture
                for m in methods:
                    enhanced = registry[m](mixture)
                    value = stoi(clean, enhanced, stoi_config).value
                    scores[(noise_id, float(snr), m)].append(value)
    cells = {key: ScoreCell(float(np.mean(vals)), len(vals))
             for key, vals in scores.items()}
    return ScoreTable(cells)


def training_pairs(manifest: Manifest, noises: list, snrs_db: list,
                   seed: int) -> list:
    """(noisy, clean) pairs from the train split, one per utterance x noise x
    SNR, sub-seeded the same way evaluate_corpus seeds its mixtures."""
    train_utts = manifest.split_utterances("train")
    if not train_utts:
        raise DspError("manifest has no train utterances")
    noise_bufs = {nid: load_wav(manifest.noise(nid, "train").wav_path)
                  for nid in noises}
    pairs = []
    for utt in train_utts:
        clean = load_wav(utt.wav_path)
        for noise_id in noises:
            for snr in snrs_db:
                sub = condition_seed(seed, utt.utterance_id, noise_id, snr)
                mixture = mix_at_snr(clean, noise_bufs[noise_id], snr,
                                     rng_seed=sub).mixture
                pairs.append((mixture, clean))
    return pairs


# ---------------------------------------------------------------------------
# Character correct rate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CcrRecord:
    condition_id: str
    correct_characters: int
    total_characters: int

    def __post_init__(self):
        if self.total_characters <= 0:
            raise DspError("total_characters must be positive")
        if not 0 <= self.correct_characters <= self.total_characters:
            raise DspError("correct_characters out of range")

    @property
    def ccr_percent(self) -> float:
        return 100.0 * self.correct_characters / self.total_characters


def ccr(reference: str, response: str, condition_id: str = "") -> CcrRecord:
    """Order-free multiset character match, capped at the reference length."""
    if not reference:
        raise DspError("reference transcript is empty")
    overlap = collections.Counter(reference) & collections.Counter(response)
    correct = min(sum(overlap.values()), len(reference))
    return CcrRecord(condition_id, correct, len(reference))


def mean_sem(values) -> tuple:
    """(mean, standard error of the mean) with the n-1 variance convention."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 1:
        raise DspError("need at least one value")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


# ---------------------------------------------------------------------------
# Matched-pair one-tailed t-test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float

    def __post_init__(self):
        if self.degrees_of_freedom < 1 or not 0.0 <= self.p_value <= 1.0:
            raise DspError("invalid test result")


def student_t_upper_tail(t: float, df: int) -> float:
    """P(T >= t) for Student's t, via the regularized incomplete beta."""
    x = df / (df + t * t)
    half_tail = 0.5 * scipy.special.betainc(df / 2.0, 0.5, x)
    return half_tail if t >= 0 else 1.0 - half_tail


def paired_t_test_one_tailed(scores_a, scores_b) -> TTestResult:
    """Tests whether b beats a: d = b - a, upper-tail p of mean(d) > 0."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DspError("paired scores must be equal-length 1-D sequences")
    n = a.size
    if n < 2:
        raise DspError("need at least two pairs")
    d = b - a
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DspError("zero variance of differences")
    t = float(d.mean() / (sd / np.sqrt(n)))
    return TTestResult(t, n - 1, student_t_upper_tail(t, n - 1))


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _six_sig(x: float) -> str:
    return f"{x:.6g}"


def emit_report(result, fmt: str, path) -> None:
    """Write a ScoreTable, TTestResult, or CcrRecord list as CSV or JSON.

    CSV prints floats to 6 significant digits for reading; JSON keeps full
    precision so a round-trip reproduces the values exactly.
    """
    path = pathlib.Path(path)
    if fmt not in ("csv", "json"):
        raise DspError(f"format must be csv or json, got {fmt!r}")
    if isinstance(result, ScoreTable):
        if not result.cells:
            raise DspError("empty score table")
        rows = sorted(result.cells.items())
        if fmt == "csv":
            lines = ["noise_id,snr_db,method,mean_stoi,n"]
            lines += [f"{k[0]},{_six_sig(k[1])},{k[2]},{_six_sig(c.mean_stoi)},{c.n_utterances}"
                      for k, c in rows]
            path.write_text("\n".join(lines) + "\n")
        else:
            payload = {"schema_version": REPORT_SCHEMA_VERSION,
                       "kind": "score_table",
                       "cells": [{"noise_id": k[0], "snr_db": k[1], "method": k[2],
                                  "mean_stoi": c.mean_stoi, "n": c.n_utterances}
                                 for k, c in rows]}
            path.write_text(json.dumps(payload, indent=2))
    elif isinstance(result, TTestResult):
        if fmt == "csv":
            path.write_text("t_statistic,degrees_of_freedom,p_value\n"
                            f"{_six_sig(result.t_statistic)},{result.degrees_of_freedom},"
                            f"{_six_sig(result.p_value)}\n")
        else:
            path.write_text(json.dumps({
                "schema_version": REPORT_SCHEMA_VERSION, "kind": "t_test",
                "t_statistic": result.t_statistic,
                "degrees_of_freedom": result.degrees_of_freedom,
                "p_value": result.p_value}, indent=2))
    elif isinstance(result, (list, tuple)) and result and all(
            isinstance(r, CcrRecord) for r in result):
        if fmt == "csv":
            lines = ["condition_id,correct_characters,total_characters,ccr_percent"]
            lines += [f"{r.condition_id},{r.correct_characters},{r.total_characters},"
                      f"{_six_sig(r.ccr_percent)}" for r in result]
            path.write_text("\n".join(lines) + "\n")
        else:
            path.write_text(json.dumps({
                "schema_version": REPORT_SCHEMA_VERSION, "kind": "ccr_records",
                "records": [asdict(r) for r in result]}, indent=2))
    else:
        raise DspError("nothing to report")


def load_score_table(path) -> ScoreTable:
    data = json.loads(pathlib.Path(path).read_text())
    if data.get("kind") != "score_table":
        raise DspError("not a score-table report")
    cells = {(c["noise_id"], float(c["snr_db"]), c["method"]):
             ScoreCell(c["mean_stoi"], c["n"]) for c in data["cells"]}
    return ScoreTable(cells)
