// Thin fetch wrapper around the listening-test service.
//
// Two error shapes exist on the wire: FastAPI validation/conflict errors carry
// {detail: ...}, and an exhausted replay budget carries {error: "replay_exhausted"}
// with status 409 on the audio route. Both surface as typed exceptions so the
// UI can tell "disable the replay button" apart from "something broke".

import type {
    CreateSessionRequest, GroupResults, SessionPlan, SessionResults, TrialScore,
} from "./types.js";

export class ApiError extends Error {
    constructor(readonly status: number, detail: string) {
        super(`HTTP ${status}: ${detail}`);
        this.name = "ApiError";
    }
}

export class ReplayExhaustedError extends ApiError {
    constructor() {
        super(409, "replay_exhausted");
        this.name = "ReplayExhaustedError";
    }
}

async function errorDetail(res: Response): Promise<string> {
    try {
        const body = await res.json();
        if (typeof body.detail === "string") return body.detail;
        if (typeof body.error === "string") return body.error;
        return JSON.stringify(body);
    } catch {
        return res.statusText || "request failed";
    }
}

export class ListenApi {
    private readonly base: string;

    constructor(baseUrl: string, private readonly fetchFn: typeof fetch = fetch) {
        this.base = baseUrl.replace(/\/+$/, "");
    }

    private async getJson<T>(path: string): Promise<T> {
        const res = await this.fetchFn(this.base + path);
        if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
        return res.json() as Promise<T>;
    }

    private async postJson<T>(path: string, body: unknown): Promise<T> {
        const res = await this.fetchFn(this.base + path, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
        return res.json() as Promise<T>;
    }

    createSession(req: CreateSessionRequest): Promise<SessionPlan> {
        return this.postJson("/sessions", req);
    }

    getPlan(sessionId: string): Promise<SessionPlan> {
        return this.getJson(`/sessions/${encodeURIComponent(sessionId)}/plan`);
    }

    /**
     * Fetch the WAV bytes for one trial. Every successful call consumes one
     * play from the server-side budget; the refusal after the budget is spent
     * comes back as ReplayExhaustedError.
     */
    async fetchStimulus(sessionId: string, trialIndex: number): Promise<ArrayBuffer> {
        const res = await this.fetchFn(
            `${this.base}/sessions/${encodeURIComponent(sessionId)}/trials/${trialIndex}/audio`);
        if (res.status === 409) throw new ReplayExhaustedError();
        if (!res.ok) throw new ApiError(res.status, await errorDetail(res));
        return res.arrayBuffer();
    }

    submitResponse(sessionId: string, trialIndex: number, response: string): Promise<TrialScore> {
        return this.postJson(`/sessions/${encodeURIComponent(sessionId)}/responses`, {
            trial_index: trialIndex,
            response,
            client_ts: Date.now() / 1000,
        });
    }

    sessionResults(sessionId: string): Promise<SessionResults> {
        return this.getJson(`/results?session=${encodeURIComponent(sessionId)}`);
    }

    groupResults(group?: string): Promise<GroupResults> {
        const query = group ? `?group=${encodeURIComponent(group)}` : "";
        return this.getJson(`/results${query}`);
    }
}
