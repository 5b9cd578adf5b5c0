"""Listening-test backend: randomized session plans, stimulus serving with a
strict two-play budget, append-only response logging, and live scoring.

A session presents 8 conditions (2 noise types x 4 processing methods) x 10
utterances = 80 trials at a single SNR, every stimulus passed through the
hearing simulation. Scoring reuses the evaluation module's character-match
rule, so the service and offline analysis can never drift apart.
"""
from __future__ import annotations

import hashlib
import json
import pathlib
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field

import numpy as np
from pydantic import BaseModel

from .dsp import DspError, SampleBuffer, load_wav, mix_at_snr, save_wav
from .evaluation import Manifest, ccr, condition_seed, mean_sem, method_registry
from .vocoder import EasVocoderConfig, vocode_eas

SESSION_SNRS_DB = (-3.0, 1.0)
DEFAULT_NOISES = ("engine", "street")
DEFAULT_METHODS = ("noisy", "mmse", "ddae", "fcn")
UTTERANCES_PER_CONDITION = 10
MAX_PLAYS = 2  # first presentation plus one repeat


@dataclass(frozen=True)
class TrialSpec:
    trial_index: int
    utterance_id: str
    noise_id: str
    method: str
    stimulus_path: str

    @property
    def condition_id(self) -> str:
        return f"{self.noise_id}|{self.method}"


@dataclass
class SessionPlan:
    session_id: str
    participant_id: str
    snr_db: float
    trials: list
    rng_seed: int
    group: str = "all"

    def __post_init__(self):
        if self.snr_db not in SESSION_SNRS_DB:
            raise DspError(f"session SNR must be one of {SESSION_SNRS_DB}")
        per_condition: dict = {}
        seen_utts = set()
        for t in self.trials:
            per_condition.setdefault(t.condition_id, []).append(t.utterance_id)
            if t.utterance_id in seen_utts:
                raise DspError(f"utterance {t.utterance_id} reused across trials")
            seen_utts.add(t.utterance_id)
        counts = {k: len(v) for k, v in per_condition.items()}
        if any(c != UTTERANCES_PER_CONDITION for c in counts.values()):
            raise DspError(f"conditions must hold {UTTERANCES_PER_CONDITION} "
                           f"utterances each, got {counts}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trials"] = [asdict(t) for t in self.trials]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SessionPlan":
        trials = [TrialSpec(**t) for t in d["trials"]]
        return cls(d["session_id"], d["participant_id"], d["snr_db"], trials,
                   d["rng_seed"], d.get("group", "all"))


@dataclass(frozen=True)
class TrialResponse:
    session_id: str
    trial_index: int
    response_characters: str
    replays_used: int
    timestamp: float

    def __post_init__(self):
        if not 0 <= self.replays_used <= MAX_PLAYS - 1:
            raise DspError("replays_used exceeds the single-repeat budget")


def _fisher_yates(items: list, rng: np.random.Generator) -> list:
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def render_stimulus(clean: SampleBuffer, noise: SampleBuffer, snr_db: float,
                    method: str, enhancers: dict, utterance_id: str,
                    mix_seed: int, cache_dir,
                    vocoder_config: EasVocoderConfig) -> str:
    """mix -> enhance -> hearing simulation, cached under a content hash."""
    mixture = mix_at_snr(clean, noise, snr_db, rng_seed=mix_seed).mixture
    enhanced = enhancers[method](mixture)
    stimulus = vocode_eas(enhanced, vocoder_config, utterance_id=utterance_id)
    digest = hashlib.sha256(stimulus.samples.tobytes()
                            + stimulus.sample_rate.to_bytes(4, "little")).hexdigest()
    path = pathlib.Path(cache_dir) / f"{digest[:24]}.wav"
    if not path.exists():
        save_wav(stimulus, path)
    return str(path)


def plan_session(manifest: Manifest, participant_id: str, snr_db: float,
                 seed: int, models: dict | None, cache_dir,
                 noises: tuple = DEFAULT_NOISES, methods: tuple = DEFAULT_METHODS,
                 vocoder_config: EasVocoderConfig = EasVocoderConfig(),
                 session_id: str | None = None, group: str = "all") -> SessionPlan:
    """Randomized constraint-satisfying assignment of utterances to the
    noise x method grid, stimuli rendered up front."""
    if snr_db not in SESSION_SNRS_DB:
        raise DspError(f"session SNR must be one of {SESSION_SNRS_DB}")
    enhancers = method_registry(models)
    for m in methods:
        if m not in enhancers:
            raise DspError(f"method {m!r} needs a model (none supplied)")
    conditions = [(n, m) for n in noises for m in methods]
    needed = len(conditions) * UTTERANCES_PER_CONDITION
    test_utts = [u for u in manifest.split_utterances("test") if u.transcript]
    if len(test_utts) < needed:
        raise DspError(f"need {needed} test utterances with transcripts, "
                       f"have {len(test_utts)}")
    noise_bufs = {n: load_wav(manifest.noise(n).wav_path) for n in noises}

    rng = np.random.default_rng(seed)
    chosen = _fisher_yates(sorted(test_utts, key=lambda u: u.utterance_id), rng)[:needed]
    pathlib.Path(cache_dir).mkdir(parents=True, exist_ok=True)
    specs = []
    for c, (noise_id, method) in enumerate(conditions):
        block = chosen[c * UTTERANCES_PER_CONDITION:(c + 1) * UTTERANCES_PER_CONDITION]
        for utt in block:
            clean = load_wav(utt.wav_path)
            mix_seed = condition_seed(seed, utt.utterance_id, noise_id, snr_db)
            path = render_stimulus(clean, noise_bufs[noise_id], snr_db, method,
                                   enhancers, utt.utterance_id, mix_seed,
                                   cache_dir, vocoder_config)
            specs.append((utt.utterance_id, noise_id, method, path))
    ordered = _fisher_yates(specs, rng)
    trials = [TrialSpec(i, *spec) for i, spec in enumerate(ordered)]
    return SessionPlan(session_id or uuid.uuid4().hex, participant_id,
                       float(snr_db), trials, seed, group)


# ---------------------------------------------------------------------------
# Persistence: one append-only JSONL file per session
# ---------------------------------------------------------------------------

class SessionStore:
    """Plan + play + response events, replayable after a restart."""

    def __init__(self, root):
        self.root = pathlib.Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> pathlib.Path:
        return self.root / f"{session_id}.jsonl"

    def append(self, session_id: str, record: dict) -> None:
        with open(self._path(session_id), "a") as fh:
            fh.write(json.dumps(record) + "\n")
            fh.flush()

    def write_plan(self, plan: SessionPlan, transcripts: dict) -> None:
        if self._path(plan.session_id).exists():
            raise DspError(f"session {plan.session_id} already stored")
        self.append(plan.session_id, {"type": "plan", "plan": plan.to_dict(),
                                      "transcripts": transcripts})

    def load_all(self) -> dict:
        """session_id -> (plan, transcripts, plays, responses)."""
        sessions = {}
        for path in sorted(self.root.glob("*.jsonl")):
            plan, transcripts = None, {}
            plays: dict = {}
            responses: dict = {}
            for line in path.read_text().splitlines():
                rec = json.loads(line)
                if rec["type"] == "plan":
                    plan = SessionPlan.from_dict(rec["plan"])
                    transcripts = rec["transcripts"]
                elif rec["type"] == "play":
                    plays[rec["trial_index"]] = rec["count"]
                elif rec["type"] == "response":
                    r = rec["response"]
                    responses[r["trial_index"]] = TrialResponse(**r)
            if plan is not None:
                sessions[plan.session_id] = (plan, transcripts, plays, responses)
        return sessions


# ---------------------------------------------------------------------------
# Live session state and aggregation
# ---------------------------------------------------------------------------

class SessionState:
    def __init__(self, plan: SessionPlan, transcripts: dict,
                 plays: dict | None = None, responses: dict | None = None):
        self.plan = plan
        self.transcripts = transcripts  # utterance_id -> reference characters
        self.plays = dict(plays or {})
        self.responses = dict(responses or {})
        self.lock = threading.Lock()

    def condition_records(self):
        """Per-condition CcrRecord over the answered trials, scored with the
        same ccr() the offline harness uses."""
        by_condition: dict = {}
        for trial in self.plan.trials:
            resp = self.responses.get(trial.trial_index)
            if resp is None:
                continue
            reference = self.transcripts[trial.utterance_id]
            record = ccr(reference, resp.response_characters)
            agg = by_condition.setdefault(trial.condition_id, [0, 0])
            agg[0] += record.correct_characters
            agg[1] += record.total_characters
        return {cid: {"correct": c, "total": t, "ccr_percent": 100.0 * c / t}
                for cid, (c, t) in sorted(by_condition.items())}


def aggregate_results(states: list) -> dict:
    """Group means and SEMs per condition across sessions."""
    per_condition: dict = {}
    for state in states:
        for cid, rec in state.condition_records().items():
            per_condition.setdefault(cid, []).append(
                {"session_id": state.plan.session_id, **rec})
    conditions = []
    for cid in sorted(per_condition):
        ccrs = [r["ccr_percent"] for r in per_condition[cid]]
        mean, sem = mean_sem(ccrs)
        noise_id, method = cid.split("|", 1)
        conditions.append({"condition_id": cid, "noise_id": noise_id,
                           "method": method, "mean_ccr": mean, "sem_ccr": sem,
                           "n_sessions": len(ccrs),
                           "per_session": per_condition[cid]})
    return {"n_sessions": len(states), "conditions": conditions}


# ---------------------------------------------------------------------------
# HTTP service
# ---------------------------------------------------------------------------

class CreateSession(BaseModel):
    participant_id: str
    snr_db: float
    seed: int
    session_id: str | None = None
    group: str = "all"


class ResponseBody(BaseModel):
    trial_index: int
    response: str
    client_ts: float | None = None


def create_app(manifest: Manifest, models: dict | None, store_dir, cache_dir,
               vocoder_config: EasVocoderConfig = EasVocoderConfig(),
               noises: tuple = DEFAULT_NOISES, methods: tuple = DEFAULT_METHODS):
    """FastAPI application; state is reconstructed from the store on startup."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse, Response

    app = FastAPI(title="listening-test service")
    # the browser client is served separately (static files), so every call
    # it makes is cross-origin; sessions are opaque tokens, no cookies
    from fastapi.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(store_dir)
    sessions: dict = {}
    for sid, (plan, transcripts, plays, responses) in store.load_all().items():
        sessions[sid] = SessionState(plan, transcripts, plays, responses)
    creation_lock = threading.Lock()

    def get_state(session_id: str) -> SessionState:
        state = sessions.get(session_id)
        if state is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return state

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        with creation_lock:
            if body.session_id and body.session_id in sessions:
                raise HTTPException(status_code=409, detail="session exists")
            try:
                plan = plan_session(manifest, body.participant_id, body.snr_db,
                                    body.seed, models, cache_dir, noises,
                                    methods, vocoder_config, body.session_id,
                                    body.group)
            except DspError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            transcripts = {u.utterance_id: u.transcript
                           for u in manifest.utterances}
            needed = {t.utterance_id for t in plan.trials}
            transcripts = {k: v for k, v in transcripts.items() if k in needed}
            store.write_plan(plan, transcripts)
            sessions[plan.session_id] = SessionState(plan, transcripts)
            return {**plan.to_dict(),
                    "progress": {"answered": [], "plays": {}}}

    @app.get("/sessions/{session_id}/plan")
    def get_plan(session_id: str):
        # progress rides along so a reconnecting client can resume at the
        # first unanswered trial without any state of its own
        state = get_state(session_id)
        with state.lock:
            progress = {"answered": sorted(state.responses),
                        "plays": {str(k): v for k, v in sorted(state.plays.items())}}
        return {**state.plan.to_dict(), "progress": progress}

    @app.get("/sessions/{session_id}/trials/{trial_index}/audio")
    def get_stimulus(session_id: str, trial_index: int):
        state = get_state(session_id)
        if not 0 <= trial_index < len(state.plan.trials):
            raise HTTPException(status_code=404, detail="trial out of range")
        with state.lock:
            count = state.plays.get(trial_index, 0)
            if count >= MAX_PLAYS:
                return JSONResponse(status_code=409,
                                    content={"error": "replay_exhausted"})
            state.plays[trial_index] = count + 1
            store.append(session_id, {"type": "play",
                                      "trial_index": trial_index,
                                      "count": count + 1})
        wav = pathlib.Path(state.plan.trials[trial_index].stimulus_path).read_bytes()
        return Response(content=wav, media_type="audio/wav")

    @app.post("/sessions/{session_id}/responses", status_code=201)
    def post_response(session_id: str, body: ResponseBody):
        state = get_state(session_id)
        if not 0 <= body.trial_index < len(state.plan.trials):
            raise HTTPException(status_code=404, detail="trial out of range")
        with state.lock:
            if body.trial_index in state.responses:
                raise HTTPException(status_code=409,
                                    detail="response already recorded")
            plays = state.plays.get(body.trial_index, 0)
            response = TrialResponse(session_id, body.trial_index, body.response,
                                     replays_used=max(plays - 1, 0),
                                     timestamp=time.time())
            state.responses[body.trial_index] = response
            store.append(session_id, {"type": "response",
                                      "response": asdict(response)})
        trial = state.plan.trials[body.trial_index]
        record = ccr(state.transcripts[trial.utterance_id], body.response)
        return {"trial_index": body.trial_index,
                "correct_characters": record.correct_characters,
                "total_characters": record.total_characters,
                "ccr_percent": record.ccr_percent}

    @app.get("/results")
    def get_results(group: str | None = None, session: str | None = None):
        if session is not None:
            state = get_state(session)
            return {"session_id": session,
                    "conditions": state.condition_records()}
        states = [s for s in sessions.values()
                  if group is None or s.plan.group == group]
        return aggregate_results(states)

    return app
