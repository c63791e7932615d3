// Message schema of the session service's WebSocket channel, mirrored
// verbatim from the server's pydantic models.

export type Role = "alice" | "bob";
export type SettingIndex = 0 | 1;

export interface ValidityTally {
    ok: number;
    fail: number;
    pending: number;
}

export interface HelloMessage {
    type: "hello";
    session_id: string;
    role?: Role | null;
    server_version?: string;
    message?: string;
}

export interface StatsMessage {
    type: "stats";
    seq: number;
    session_id: string;
    state: string;
    session_time_s: number;
    roles_claimed: Record<Role, boolean>;
    roles_connected: Record<Role, boolean>;
    n_choices_alice: number;
    n_choices_bob: number;
    n_pairs: number;
    n_counted: number;
    counts_table: number[][][][];
    s_value: number | null;
    s_sigma: number | null;
    pairs_fully_valid: number;
    locality: ValidityTally;
    freedom_of_choice: ValidityTally;
    current_settings: Record<Role, number | null>;
    pair_loss_db: number;
    geometry_enabled: boolean;
}

export interface ReportMessage {
    type: "report";
    session_id: string;
    report: Record<string, unknown>;
    report_hash: string;
    text: string;
}

export interface ErrorMessage {
    type: "error";
    code: string;
    message: string;
}

export type ServerMessage = HelloMessage | StatsMessage | ReportMessage | ErrorMessage;

export interface ClaimRoleMessage {
    type: "claim_role";
    role: Role;
}

export interface ChoiceMessage {
    type: "choice";
    setting: SettingIndex;
    choice_id: string;
    client_time_s?: number;
}

export type ClientMessage = ClaimRoleMessage | ChoiceMessage | { type: "hello" };

export function parseServerMessage(data: string): ServerMessage | null {
    let raw: unknown;
    try {
        raw = JSON.parse(data);
    } catch {
        return null;
    }
    if (typeof raw !== "object" || raw === null) return null;
    const kind = (raw as { type?: unknown }).type;
    if (kind === "hello" || kind === "stats" || kind === "report" || kind === "error") {
        return raw as ServerMessage;
    }
    return null;
}
