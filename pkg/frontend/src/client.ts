// Session client: claims a role over the WebSocket channel, forwards
// choices, and feeds server messages into the console state. While the
// socket is down, outgoing choices are buffered for up to one second and
// then dropped with a visible warning; buffered choices are resent on
// reconnect with their original ids, so the server can deduplicate.

import {
    ChoiceMessage,
    ClientMessage,
    Role,
    SettingIndex,
    parseServerMessage,
} from "./protocol.js";
import { ConsoleState, applyStats, initialState } from "./state.js";

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onopen: (() => void) | null;
    onmessage: ((event: { data: string }) => void) | null;
    onclose: (() => void) | null;
}

export type SocketFactory = () => SocketLike;

export interface ClientOptions {
    role: Role | "spectator";
    socketFactory: SocketFactory;
    now?: () => number;
    bufferMs?: number;
    reconnectDelayMs?: number;
    maxReconnectDelayMs?: number;
    scheduler?: (fn: () => void, delayMs: number) => void;
}

interface BufferedChoice {
    message: ChoiceMessage;
    bufferedAtMs: number;
}

export class SessionClient {
    readonly state: ConsoleState;
    onUpdate: ((state: ConsoleState) => void) | null = null;

    private socket: SocketLike | null = null;
    private options: Required<Omit<ClientOptions, "role" | "socketFactory">> & ClientOptions;
    private pending: BufferedChoice[] = [];
    private reconnectAttempts = 0;
    private closedByUser = false;

    constructor(options: ClientOptions) {
        this.options = {
            now: () => Date.now(),
            bufferMs: 1000,
            reconnectDelayMs: 500,
            maxReconnectDelayMs: 15000,
            scheduler: (fn, delay) => setTimeout(fn, delay),
            ...options,
        };
        this.state = initialState(options.role);
    }

    connect(): void {
        this.closedByUser = false;
        this.state.connection = "connecting";
        const socket = this.options.socketFactory();
        this.socket = socket;
        socket.onopen = () => {
            this.reconnectAttempts = 0;
            this.state.connection = "open";
            if (this.state.role !== "spectator") {
                this.sendRaw({ type: "claim_role", role: this.state.role });
            }
            this.flushPending();
            this.emitUpdate();
        };
        socket.onmessage = (event) => this.handleMessage(event.data);
        socket.onclose = () => {
            this.state.connection = "closed";
            this.emitUpdate();
            if (!this.closedByUser) {
                this.scheduleReconnect();
            }
        };
    }

    close(): void {
        this.closedByUser = true;
        this.socket?.close();
    }

    /** Queue or send one choice; returns false when dropped as stale. */
    submitChoice(setting: SettingIndex, choiceId: string): boolean {
        if (this.state.role === "spectator") {
            return false; // read-only view never emits choices
        }
        const message: ChoiceMessage = {
            type: "choice",
            setting,
            choice_id: choiceId,
            client_time_s: this.options.now() / 1000,
        };
        this.state.currentSetting = setting;
        this.state.lastChoiceAtMs = this.options.now();
        this.state.choiceTimesMs.push(this.state.lastChoiceAtMs);
        if (this.state.connection === "open" && this.socket) {
            this.sendRaw(message);
            this.emitUpdate();
            return true;
        }
        this.pending.push({ message, bufferedAtMs: this.options.now() });
        this.emitUpdate();
        return true;
    }

    private flushPending(): void {
        const now = this.options.now();
        const fresh: BufferedChoice[] = [];
        for (const entry of this.pending) {
            if (now - entry.bufferedAtMs <= this.options.bufferMs) {
                fresh.push(entry);
            } else {
                this.state.droppedChoices += 1;
                this.state.lastError = "connection lost: buffered choice dropped after 1 s";
            }
        }
        this.pending = [];
        for (const entry of fresh) {
            this.sendRaw(entry.message); // original choice_id: server deduplicates
        }
    }

    private scheduleReconnect(): void {
        const delay = Math.min(
            this.options.reconnectDelayMs * 2 ** this.reconnectAttempts,
            this.options.maxReconnectDelayMs,
        );
        this.reconnectAttempts += 1;
        this.options.scheduler(() => {
            if (!this.closedByUser) this.connect();
        }, delay);
    }

    private handleMessage(data: string): void {
        const message = parseServerMessage(data);
        if (message === null) return;
        switch (message.type) {
            case "hello":
                break;
            case "stats":
                applyStats(this.state, message); // stale snapshots ignored
                break;
            case "report":
                this.state.report = message;
                break;
            case "error":
                this.state.lastError = `${message.code}: ${message.message}`;
                break;
        }
        this.emitUpdate();
    }

    private sendRaw(message: ClientMessage): void {
        this.socket?.send(JSON.stringify(message));
    }

    private emitUpdate(): void {
        this.onUpdate?.(this.state);
    }
}
