// In-memory stand-in for the session service, speaking the documented
// message schema over a socket-shaped object. Used to test console
// conformance without a network.

import { SocketLike } from "../src/client.js";
import {
    ChoiceMessage,
    ClaimRoleMessage,
    Role,
    ServerMessage,
    StatsMessage,
} from "../src/protocol.js";

export class StubSocket implements SocketLike {
    onopen: (() => void) | null = null;
    onmessage: ((event: { data: string }) => void) | null = null;
    onclose: (() => void) | null = null;
    sent: string[] = [];
    closed = false;

    constructor(private service: StubService) {}

    send(data: string): void {
        this.sent.push(data);
        this.service.receive(this, data);
    }

    close(): void {
        this.closed = true;
        this.service.detach(this);
        this.onclose?.();
    }

    // test/service helpers
    open(): void {
        this.onopen?.();
    }

    push(message: ServerMessage): void {
        this.onmessage?.({ data: JSON.stringify(message) });
    }

    dropFromServer(): void {
        this.onclose?.();
    }
}

export class StubService {
    sessionId = "stub-session";
    claimed: Partial<Record<Role, StubSocket>> = {};
    seenChoiceIds = new Set<string>();
    acceptedChoices: ChoiceMessage[] = [];
    duplicateChoices = 0;
    seq = 0;

    connect(): StubSocket {
        return new StubSocket(this);
    }

    detach(socket: StubSocket): void {
        for (const role of Object.keys(this.claimed) as Role[]) {
            if (this.claimed[role] === socket) delete this.claimed[role];
        }
    }

    receive(socket: StubSocket, data: string): void {
        const message = JSON.parse(data) as ClaimRoleMessage | ChoiceMessage | { type: string };
        if (message.type === "claim_role") {
            const role = (message as ClaimRoleMessage).role;
            if (this.claimed[role] && this.claimed[role] !== socket) {
                socket.push({
                    type: "error",
                    code: "role-conflict",
                    message: `role '${role}' is already claimed`,
                });
                return;
            }
            this.claimed[role] = socket;
            socket.push({
                type: "hello",
                session_id: this.sessionId,
                role,
                message: "role claimed",
            });
        } else if (message.type === "choice") {
            const choice = message as ChoiceMessage;
            if (choice.choice_id && this.seenChoiceIds.has(choice.choice_id)) {
                this.duplicateChoices += 1;
                return;
            }
            if (choice.choice_id) this.seenChoiceIds.add(choice.choice_id);
            this.acceptedChoices.push(choice);
        }
    }

    statsSnapshot(overrides: Partial<StatsMessage> = {}): StatsMessage {
        this.seq += 1;
        const zeros = [
            [
                [
                    [0, 0],
                    [0, 0],
                ],
                [
                    [0, 0],
                    [0, 0],
                ],
            ],
            [
                [
                    [0, 0],
                    [0, 0],
                ],
                [
                    [0, 0],
                    [0, 0],
                ],
            ],
        ];
        return {
            type: "stats",
            seq: this.seq,
            session_id: this.sessionId,
            state: "running",
            session_time_s: this.seq * 0.5,
            roles_claimed: { alice: true, bob: true },
            roles_connected: { alice: true, bob: true },
            n_choices_alice: 0,
            n_choices_bob: 0,
            n_pairs: 0,
            n_counted: 0,
            counts_table: zeros,
            s_value: null,
            s_sigma: null,
            pairs_fully_valid: 0,
            locality: { ok: 0, fail: 0, pending: 0 },
            freedom_of_choice: { ok: 0, fail: 0, pending: 0 },
            current_settings: { alice: null, bob: null },
            pair_loss_db: 90.0,
            geometry_enabled: true,
            ...overrides,
        };
    }
}
