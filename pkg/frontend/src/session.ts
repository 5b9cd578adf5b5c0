// Session state machine, kept free of DOM and network so it can be tested
// directly. The driver (main.ts) performs the fetches and playback, then
// feeds the outcomes back in as events; every transition returns a new state.
//
// Ground rules baked into the transitions:
//   - trial order is exactly as served, never reordered here
//   - a trial cannot be advanced past without a recorded submission
//   - the replay budget is the server's; these counters only drive the
//     button affordance and are corrected whenever the server disagrees
//   - no scoring happens on the client, scores arrive from the service

import type { SessionPlan, TrialScore } from "./types.js";

export const MAX_PLAYS = 2;   // first presentation plus one repeat

export type TrialPhase =
    | "fetching"      // stimulus request in flight
    | "fetch-error"   // request failed, retry allowed (budget untouched)
    | "playing"       // audio element is presenting the stimulus
    | "responding"    // playback finished at least once, entry box enabled
    | "submitting"    // response POST in flight
    | "scored";       // server score shown, short break before the next trial

export interface TrialState {
    index: number;
    playsUsed: number;          // server-confirmed stimulus fetches
    replayRemaining: number;
    playbackDone: boolean;
    enteredResponse: string;
    score: TrialScore | null;
    phase: TrialPhase;
}

export interface UiSessionState {
    plan: SessionPlan;
    answered: ReadonlySet<number>;
    playsByTrial: ReadonlyMap<number, number>;
    currentTrialIndex: number | null;   // null once every trial is answered
    trial: TrialState | null;
    complete: boolean;
}

export function firstUnanswered(answered: ReadonlySet<number>, nTrials: number): number | null {
    for (let k = 0; k < nTrials; k++) {
        if (!answered.has(k)) return k;
    }
    return null;
}

function startTrial(index: number, playsUsed: number): TrialState {
    return {
        index,
        playsUsed,
        // one repeat after the automatic presentation; a resumed trial that
        // already spent both fetches comes back with the button disabled
        replayRemaining: Math.max(0, MAX_PLAYS - Math.max(playsUsed, 1)),
        // a resumed trial was already heard once, so entry stays enabled
        playbackDone: playsUsed > 0,
        enteredResponse: "",
        score: null,
        phase: playsUsed > 0 ? "responding" : "fetching",
    };
}

/** Rebuild client state from the served plan, resuming at the first
 *  unanswered trial. All progress comes from plan.progress. */
export function initSession(plan: SessionPlan): UiSessionState {
    const answered = new Set(plan.progress.answered);
    const playsByTrial = new Map<number, number>();
    for (const [key, count] of Object.entries(plan.progress.plays)) {
        playsByTrial.set(Number(key), count);
    }
    const index = firstUnanswered(answered, plan.trials.length);
    return {
        plan,
        answered,
        playsByTrial,
        currentTrialIndex: index,
        trial: index === null ? null : startTrial(index, playsByTrial.get(index) ?? 0),
        complete: index === null,
    };
}

/** True when the driver owes this trial its automatic first presentation. */
export function needsAutoFetch(state: UiSessionState): boolean {
    return state.trial !== null
        && state.trial.phase === "fetching"
        && state.trial.playsUsed === 0;
}

function withTrial(state: UiSessionState, trial: TrialState): UiSessionState {
    return { ...state, trial };
}

function requireTrial(state: UiSessionState, where: string): TrialState {
    if (state.trial === null) throw new Error(`${where}: no active trial`);
    return state.trial;
}

export function stimulusFetched(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "stimulusFetched");
    if (t.phase !== "fetching") throw new Error(`stimulusFetched in phase ${t.phase}`);
    const playsUsed = t.playsUsed + 1;
    const playsByTrial = new Map(state.playsByTrial);
    playsByTrial.set(t.index, playsUsed);
    return {
        ...withTrial(state, {
            ...t,
            playsUsed,
            replayRemaining: Math.max(0, MAX_PLAYS - playsUsed),
            phase: "playing",
        }),
        playsByTrial,
    };
}

export function fetchFailed(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "fetchFailed");
    if (t.phase !== "fetching") throw new Error(`fetchFailed in phase ${t.phase}`);
    return withTrial(state, { ...t, phase: "fetch-error" });
}

export function retryFetch(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "retryFetch");
    if (t.phase !== "fetch-error") throw new Error(`retryFetch in phase ${t.phase}`);
    return withTrial(state, { ...t, phase: "fetching" });
}

export function playbackEnded(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "playbackEnded");
    if (t.phase !== "playing") throw new Error(`playbackEnded in phase ${t.phase}`);
    return withTrial(state, { ...t, playbackDone: true, phase: "responding" });
}

export function requestReplay(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "requestReplay");
    if (t.phase !== "responding") throw new Error(`requestReplay in phase ${t.phase}`);
    if (t.replayRemaining <= 0) throw new Error("replay budget exhausted");
    return withTrial(state, { ...t, phase: "fetching" });
}

/** The server refused the fetch: trust it and zero the budget. The entry box
 *  stays usable, since refusal implies the stimulus was fully served before. */
export function replayDenied(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "replayDenied");
    if (t.phase !== "fetching") throw new Error(`replayDenied in phase ${t.phase}`);
    const playsByTrial = new Map(state.playsByTrial);
    playsByTrial.set(t.index, MAX_PLAYS);
    return {
        ...withTrial(state, {
            ...t,
            playsUsed: MAX_PLAYS,
            replayRemaining: 0,
            playbackDone: true,
            phase: "responding",
        }),
        playsByTrial,
    };
}

export function editResponse(state: UiSessionState, text: string): UiSessionState {
    const t = requireTrial(state, "editResponse");
    if (t.phase !== "responding") throw new Error(`editResponse in phase ${t.phase}`);
    return withTrial(state, { ...t, enteredResponse: text });
}

export function beginSubmit(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "beginSubmit");
    if (t.phase !== "responding") throw new Error(`beginSubmit in phase ${t.phase}`);
    if (!t.playbackDone) throw new Error("cannot submit before playback completes");
    return withTrial(state, { ...t, phase: "submitting" });
}

/** Submission POST failed (network): back to the entry box, nothing lost. */
export function submitFailed(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "submitFailed");
    if (t.phase !== "submitting") throw new Error(`submitFailed in phase ${t.phase}`);
    return withTrial(state, { ...t, phase: "responding" });
}

export function scoreReceived(state: UiSessionState, score: TrialScore): UiSessionState {
    const t = requireTrial(state, "scoreReceived");
    if (t.phase !== "submitting") throw new Error(`scoreReceived in phase ${t.phase}`);
    if (score.trial_index !== t.index) {
        throw new Error(`score for trial ${score.trial_index} while on ${t.index}`);
    }
    const answered = new Set(state.answered);
    answered.add(t.index);
    return {
        ...withTrial(state, { ...t, score, phase: "scored" }),
        answered,
    };
}

/** Leave the between-trials break. Only a scored trial can be advanced past. */
export function advance(state: UiSessionState): UiSessionState {
    const t = requireTrial(state, "advance");
    if (t.phase !== "scored") throw new Error("cannot advance without a recorded submission");
    const index = firstUnanswered(state.answered, state.plan.trials.length);
    return {
        ...state,
        currentTrialIndex: index,
        trial: index === null ? null : startTrial(index, state.playsByTrial.get(index) ?? 0),
        complete: index === null,
    };
}

export function answeredCount(state: UiSessionState): number {
    return state.answered.size;
}
