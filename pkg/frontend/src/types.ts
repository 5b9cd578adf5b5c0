// Wire types, mirroring the service JSON field for field.
// The service is the single source of truth; nothing here is computed locally.

export interface TrialSpec {
    trial_index: number;
    utterance_id: string;
    noise_id: string;
    method: string;
    stimulus_path: string;   // server-side cache path, informational only
}

/** Play counts and answered trials, keyed the way the server serializes them. */
export interface SessionProgress {
    answered: number[];                 // sorted trial indexes
    plays: Record<string, number>;      // trial index (as string) -> fetch count
}

export interface SessionPlan {
    session_id: string;
    participant_id: string;
    snr_db: number;
    trials: TrialSpec[];
    rng_seed: number;
    group: string;
    progress: SessionProgress;
}

/** Returned by POST /responses: the server-side score for one trial. */
export interface TrialScore {
    trial_index: number;
    correct_characters: number;
    total_characters: number;
    ccr_percent: number;
}

export interface ConditionRecord {
    correct: number;
    total: number;
    ccr_percent: number;
}

export interface SessionResults {
    session_id: string;
    conditions: Record<string, ConditionRecord>;   // "noise|method" -> record
}

export interface GroupCondition {
    condition_id: string;
    noise_id: string;
    method: string;
    mean_ccr: number;
    sem_ccr: number;
    n_sessions: number;
}

export interface GroupResults {
    n_sessions: number;
    conditions: GroupCondition[];
}

export interface CreateSessionRequest {
    participant_id: string;
    snr_db: number;
    seed: number;
    session_id?: string;
    group?: string;
}
