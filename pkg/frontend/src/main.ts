// DOM driver. All experiment logic lives in session.ts; this file only wires
// buttons and the audio element to the state machine and the service API.

import { ApiError, ListenApi, ReplayExhaustedError } from "./api.js";
import * as sm from "./session.js";
import type { UiSessionState } from "./session.js";
import type { GroupResults, SessionResults } from "./types.js";

let api: ListenApi;
let state: UiSessionState | null = null;

const audio = new Audio();
let audioUrl: string | null = null;

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function show(screenId: string) {
    for (const s of document.querySelectorAll<HTMLElement>(".screen")) {
        s.hidden = s.id !== screenId;
    }
}

function setStatus(text: string) {
    el<HTMLElement>("trial-status").textContent = text;
}

// --- setup screen -----------------------------------------------------------

function readSetup() {
    return {
        baseUrl: el<HTMLInputElement>("base-url").value.trim() || "http://127.0.0.1:8000",
        participant: el<HTMLInputElement>("participant-id").value.trim(),
        snrDb: Number(el<HTMLSelectElement>("snr-db").value),
        seed: Number(el<HTMLInputElement>("seed").value),
        sessionId: el<HTMLInputElement>("session-id").value.trim(),
        group: el<HTMLInputElement>("group").value.trim() || "all",
    };
}

async function startSession() {
    const s = readSetup();
    api = new ListenApi(s.baseUrl);
    setSetupError("");
    try {
        const plan = await api.createSession({
            participant_id: s.participant,
            snr_db: s.snrDb,
            seed: s.seed,
            session_id: s.sessionId || undefined,
            group: s.group,
        });
        beginFlow(sm.initSession(plan));
    } catch (err) {
        setSetupError(String(err));
    }
}

// Resume: the plan response carries progress, initSession lands on the first
// unanswered trial. Nothing about the session is kept in the browser.
async function resumeSession() {
    const s = readSetup();
    api = new ListenApi(s.baseUrl);
    setSetupError("");
    if (!s.sessionId) {
        setSetupError("enter the session id to resume");
        return;
    }
    try {
        const plan = await api.getPlan(s.sessionId);
        beginFlow(sm.initSession(plan));
    } catch (err) {
        setSetupError(String(err));
    }
}

function setSetupError(text: string) {
    el<HTMLElement>("setup-error").textContent = text;
}

// --- trial flow -------------------------------------------------------------

function beginFlow(initial: UiSessionState) {
    state = initial;
    if (state.complete) {
        void showSummary();
        return;
    }
    renderTrial();
    if (sm.needsAutoFetch(state)) void fetchAndPlay();
}

async function fetchAndPlay() {
    if (!state || !state.trial) return;
    const trialIndex = state.trial.index;
    renderTrial();
    try {
        const bytes = await api.fetchStimulus(state.plan.session_id, trialIndex);
        state = sm.stimulusFetched(state);
        renderTrial();
        playBytes(bytes);
    } catch (err) {
        if (err instanceof ReplayExhaustedError) {
            state = sm.replayDenied(state);
        } else {
            state = sm.fetchFailed(state);
        }
        renderTrial();
    }
}

function playBytes(bytes: ArrayBuffer) {
    if (audioUrl) URL.revokeObjectURL(audioUrl);
    audioUrl = URL.createObjectURL(new Blob([bytes], { type: "audio/wav" }));
    audio.src = audioUrl;
    void audio.play();
}

audio.addEventListener("ended", () => {
    if (!state || !state.trial || state.trial.phase !== "playing") return;
    state = sm.playbackEnded(state);
    renderTrial();
    el<HTMLInputElement>("response-box").focus();
});

function onReplay() {
    if (!state || !state.trial) return;
    state = sm.requestReplay(state);
    void fetchAndPlay();
}

function onRetryFetch() {
    if (!state) return;
    state = sm.retryFetch(state);
    void fetchAndPlay();
}

async function onSubmit() {
    if (!state || !state.trial) return;
    const trialIndex = state.trial.index;
    const text = el<HTMLInputElement>("response-box").value;
    state = sm.editResponse(state, text);
    if (text.trim() === "") {
        const ok = window.confirm(
            "Submit an empty response? The trial will score 0%.");
        if (!ok) return;
    }
    state = sm.beginSubmit(state);
    renderTrial();
    try {
        const score = await api.submitResponse(
            state.plan.session_id, trialIndex, text);
        state = sm.scoreReceived(state, score);
        showPause(score.ccr_percent);
    } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
            // already recorded (double submit from another tab): re-sync
            const plan = await api.getPlan(state.plan.session_id);
            beginFlow(sm.initSession(plan));
            return;
        }
        state = sm.submitFailed(state);
        renderTrial();
        setStatus(`submission failed (${String(err)}), try again`);
    }
}

function onContinue() {
    if (!state) return;
    state = sm.advance(state);
    if (state.complete) {
        void showSummary();
        return;
    }
    el<HTMLInputElement>("response-box").value = "";
    renderTrial();
    if (sm.needsAutoFetch(state)) void fetchAndPlay();
}

function renderTrial() {
    if (!state || !state.trial) return;
    const t = state.trial;
    show("trial-screen");
    el<HTMLElement>("trial-counter").textContent =
        `Trial ${t.index + 1} of ${state.plan.trials.length}`;
    el<HTMLElement>("answered-counter").textContent =
        `${sm.answeredCount(state)} answered`;

    const replayButton = el<HTMLButtonElement>("replay-button");
    replayButton.disabled = t.phase !== "responding" || t.replayRemaining <= 0;
    replayButton.textContent =
        t.replayRemaining > 0 ? "Replay (1 left)" : "Replay (none left)";

    el<HTMLInputElement>("response-box").disabled = !t.playbackDone;
    el<HTMLButtonElement>("submit-button").disabled =
        t.phase !== "responding" || !t.playbackDone;
    el<HTMLElement>("fetch-error").hidden = t.phase !== "fetch-error";

    switch (t.phase) {
        case "fetching": setStatus("loading stimulus..."); break;
        case "fetch-error": setStatus("network problem, nothing was consumed"); break;
        case "playing": setStatus("listen..."); break;
        case "responding": setStatus("type exactly what you heard"); break;
        case "submitting": setStatus("sending..."); break;
        case "scored": setStatus(""); break;
    }
}

function showPause(ccrPercent: number) {
    show("pause-screen");
    el<HTMLElement>("pause-score").textContent =
        `Trial scored: ${ccrPercent.toFixed(1)}% of characters correct.`;
}

// --- summary screen ---------------------------------------------------------

async function showSummary() {
    if (!state) return;
    show("summary-screen");
    el<HTMLElement>("summary-session").textContent = state.plan.session_id;
    try {
        const results: SessionResults = await api.sessionResults(state.plan.session_id);
        const rows = Object.entries(results.conditions).map(([cid, rec]) =>
            `<tr><td>${cid}</td><td>${rec.correct}/${rec.total}</td>` +
            `<td>${rec.ccr_percent.toFixed(1)}%</td></tr>`);
        el<HTMLElement>("summary-table-body").innerHTML = rows.join("");
    } catch (err) {
        el<HTMLElement>("summary-table-body").innerHTML =
            `<tr><td colspan="3">${String(err)}</td></tr>`;
    }
}

// --- experimenter dashboard (#dashboard) -------------------------------------

let dashboardTimer: number | undefined;

async function refreshDashboard() {
    const baseUrl = el<HTMLInputElement>("dash-base-url").value.trim()
        || "http://127.0.0.1:8000";
    const group = el<HTMLInputElement>("dash-group").value.trim();
    const dashApi = new ListenApi(baseUrl);
    try {
        const results: GroupResults = await dashApi.groupResults(group || undefined);
        el<HTMLElement>("dash-n").textContent = `${results.n_sessions} session(s)`;
        const rows = results.conditions.map(c =>
            `<tr><td>${c.noise_id}</td><td>${c.method}</td>` +
            `<td>${c.mean_ccr.toFixed(1)}%</td><td>${c.sem_ccr.toFixed(1)}</td>` +
            `<td>${c.n_sessions}</td></tr>`);
        el<HTMLElement>("dash-table-body").innerHTML = rows.join("");
        el<HTMLElement>("dash-error").textContent = "";
    } catch (err) {
        el<HTMLElement>("dash-error").textContent = String(err);
    }
}

function route() {
    if (window.clearInterval && dashboardTimer !== undefined) {
        window.clearInterval(dashboardTimer);
        dashboardTimer = undefined;
    }
    if (window.location.hash === "#dashboard") {
        show("dashboard-screen");
        void refreshDashboard();
        dashboardTimer = window.setInterval(refreshDashboard, 5000);
    } else {
        show("setup-screen");
    }
}

document.addEventListener("DOMContentLoaded", () => {
    el<HTMLButtonElement>("start-button").addEventListener("click", () => void startSession());
    el<HTMLButtonElement>("resume-button").addEventListener("click", () => void resumeSession());
    el<HTMLButtonElement>("replay-button").addEventListener("click", onReplay);
    el<HTMLButtonElement>("retry-button").addEventListener("click", onRetryFetch);
    el<HTMLButtonElement>("submit-button").addEventListener("click", () => void onSubmit());
    el<HTMLButtonElement>("continue-button").addEventListener("click", onContinue);
    el<HTMLButtonElement>("dash-refresh").addEventListener("click", () => void refreshDashboard());
    el<HTMLInputElement>("response-box").addEventListener("keydown", (ev) => {
        if (ev.key === "Enter") void onSubmit();
    });
    window.addEventListener("hashchange", route);
    route();
});
