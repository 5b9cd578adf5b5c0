"""A scripted participant walking through the listening-test service.

Stands the HTTP app up in process, creates a session (stimuli are mixed,
enhanced, and passed through the hearing simulation at plan time), plays
a few trials against the two-play budget, types answers, and reads the
live per-condition character scores back.
"""
import pathlib
import tempfile

from fastapi.testclient import TestClient

from easlab import Manifest, NoiseEntry, UtteranceEntry, save_wav
from easlab.listening import create_app
from easlab.synth import noise_track, speech_like

work = pathlib.Path(tempfile.mkdtemp(prefix="easlab_listen_"))
words = ["sunrise", "harbor", "lantern", "meadow", "copper", "violet",
         "ember", "willow", "falcon", "marble"]
utterances = []
for i in range(40):
    utt_id = f"tespk{i % 3}_u{i:02d}"
    path = work / f"{utt_id}.wav"
    save_wav(speech_like(8000, 16000, rng_seed=100 + i), path)
    utterances.append(UtteranceEntry(utt_id, str(path), f"tespk{i % 3}",
                                     words[i % len(words)], "test"))
noises = []
for kind in ("engine", "street"):
    path = work / f"{kind}.wav"
    save_wav(noise_track(kind, 32000, 16000, rng_seed=200), path)
    noises.append(NoiseEntry(kind, str(path), "test"))

app = create_app(Manifest(utterances, noises), models=None,
                 store_dir=work / "sessions", cache_dir=work / "stimuli",
                 methods=("noisy", "mmse"))

with TestClient(app) as client:
    plan = client.post("/sessions", json={
        "participant_id": "demo", "snr_db": 1.0, "seed": 8,
        "session_id": "demo-session"}).json()
    print(f"session {plan['session_id']}: {len(plan['trials'])} trials "
          f"at {plan['snr_db']} dB "
          f"(2 noises x 2 methods x 10 utterances, order randomized)")

    print("\nplay budget on trial 0:")
    for attempt in range(3):
        reply = client.get("/sessions/demo-session/trials/0/audio")
        note = f"{len(reply.content)} bytes of wav" if reply.status_code == 200 \
            else reply.json()["error"]
        print(f"  attempt {attempt + 1}: {reply.status_code} ({note})")

    transcripts = {u.utterance_id: u.transcript for u in utterances}
    print("\nanswering every trial (perfect on engine, sloppy on street):")
    for trial in plan["trials"]:
        truth = transcripts[trial["utterance_id"]]
        answer = truth if trial["noise_id"] == "engine" else truth[:4]
        client.post("/sessions/demo-session/responses", json={
            "trial_index": trial["trial_index"], "response": answer})

    results = client.get("/results", params={"session": "demo-session"}).json()
    print(f"{'condition':>16} {'ccr':>7}")
    for cid, rec in results["conditions"].items():
        print(f"{cid:>16} {rec['ccr_percent']:6.1f}%")
