// Keyboard handling: two keys map to the two analyzer settings, with a
// debounce interval so holding or hammering a key emits at most one
// choice per interval (250 ms default, i.e. at most 4 Hz).

import { SettingIndex } from "./protocol.js";

export type KeyBindings = Record<string, SettingIndex>;

export const DEFAULT_BINDINGS: KeyBindings = { f: 0, j: 1 };
export const DEFAULT_DEBOUNCE_MS = 250;

export interface EmittedChoice {
    setting: SettingIndex;
    choiceId: string;
    atMs: number;
}

export class ChoiceInput {
    private bindings: KeyBindings;
    private debounceMs: number;
    private now: () => number;
    private lastEmitMs: number | null = null;
    private counter = 0;
    private idPrefix: string;

    constructor(
        bindings: KeyBindings = DEFAULT_BINDINGS,
        debounceMs: number = DEFAULT_DEBOUNCE_MS,
        now: () => number = () => performance.now(),
        idPrefix: string = Math.random().toString(36).slice(2, 8),
    ) {
        this.bindings = bindings;
        this.debounceMs = debounceMs;
        this.now = now;
        this.idPrefix = idPrefix;
    }

    /** Map a key press to a choice, or null when unbound or coalesced. */
    handleKey(key: string): EmittedChoice | null {
        const setting = this.bindings[key];
        if (setting === undefined) return null;
        const at = this.now();
        if (this.lastEmitMs !== null && at - this.lastEmitMs < this.debounceMs) {
            return null; // within the debounce interval: coalesced
        }
        this.lastEmitMs = at;
        this.counter += 1;
        return { setting, choiceId: `${this.idPrefix}-${this.counter}`, atMs: at };
    }
}
