// Console state: the latest stats snapshot wins by sequence number, stale
// or duplicate snapshots never overwrite newer ones, and a jump in the
// numbering raises a resync flag until the stream is contiguous again.

import { ReportMessage, Role, StatsMessage } from "./protocol.js";

export type ConsoleRole = Role | "spectator";

export interface ConsoleState {
    role: ConsoleRole;
    connection: "connecting" | "open" | "closed";
    currentSetting: 0 | 1 | null;
    lastChoiceAtMs: number | null;
    choiceTimesMs: number[];
    stats: StatsMessage | null;
    resync: boolean;
    report: ReportMessage | null;
    lastError: string | null;
    droppedChoices: number;
}

export function initialState(role: ConsoleRole): ConsoleState {
    return {
        role,
        connection: "connecting",
        currentSetting: null,
        lastChoiceAtMs: null,
        choiceTimesMs: [],
        stats: null,
        resync: false,
        report: null,
        lastError: null,
        droppedChoices: 0,
    };
}

/** Apply a stats snapshot; returns false when ignored as stale. */
export function applyStats(state: ConsoleState, message: StatsMessage): boolean {
    const current = state.stats;
    if (current !== null && message.seq <= current.seq) {
        return false;
    }
    if (current !== null && message.seq > current.seq + 1) {
        state.resync = true; // gap in the stream; next contiguous snapshot clears it
    } else {
        state.resync = false;
    }
    state.stats = message;
    return true;
}

/** Choice rate over the trailing window, for the pacing indicator. */
export function choiceRateHz(state: ConsoleState, nowMs: number, windowMs = 3000): number | null {
    const cutoff = nowMs - windowMs;
    state.choiceTimesMs = state.choiceTimesMs.filter((t) => t >= cutoff);
    if (state.choiceTimesMs.length === 0) return null;
    return state.choiceTimesMs.length / (windowMs / 1000);
}

/** Per-setting-pair totals out of the 2x2x2x2 counts table. */
export function settingTotals(stats: StatsMessage | null): number[][] {
    const totals = [
        [0, 0],
        [0, 0],
    ];
    if (!stats) return totals;
    for (let ia = 0; ia < 2; ia++) {
        for (let ib = 0; ib < 2; ib++) {
            let n = 0;
            for (let oa = 0; oa < 2; oa++) {
                for (let ob = 0; ob < 2; ob++) {
                    n += stats.counts_table[ia][ib][oa][ob];
                }
            }
            totals[ia][ib] = n;
        }
    }
    return totals;
}
