// Rendering: pure field computation from state, applied to the DOM by id.
// The console does no physics; every number displayed comes from the
// server's latest snapshot.

import { formatCount, formatS, formatSeconds, paceLabel } from "./format.js";
import { ConsoleState, choiceRateHz, settingTotals } from "./state.js";

export interface RenderOptions {
    // demo mode reveals both observers' current settings; the default
    // keeps each observer blind to the other's basis
    demo?: boolean;
}

export function renderFields(
    state: ConsoleState,
    nowMs: number,
    options: RenderOptions = {},
): Record<string, string> {
    const stats = state.stats;
    const fields: Record<string, string> = {
        role: state.role,
        connection: state.connection,
        session_state: stats?.state ?? "—",
        session_time: stats ? formatSeconds(stats.session_time_s) : "—",
        setting: state.currentSetting === null ? "—" : `setting ${state.currentSetting}`,
        pace: paceLabel(choiceRateHz(state, nowMs)),
        s_line: formatS(stats?.s_value ?? null, stats?.s_sigma ?? null),
        pairs: formatCount(stats?.n_pairs),
        counted: formatCount(stats?.n_counted),
        choices_alice: formatCount(stats?.n_choices_alice),
        choices_bob: formatCount(stats?.n_choices_bob),
        loss: stats ? `${stats.pair_loss_db.toFixed(1)} dB` : "—",
        resync: state.resync ? "resyncing…" : "",
        error: state.lastError ?? "",
        dropped: state.droppedChoices ? `${state.droppedChoices} choice(s) dropped offline` : "",
        report: state.report ? state.report.text : "",
    };
    if (stats && stats.geometry_enabled) {
        fields.validity =
            `locality ${stats.locality.ok}/${stats.locality.fail}/${stats.locality.pending} · ` +
            `setting-independence ${stats.freedom_of_choice.ok}/${stats.freedom_of_choice.fail}/${stats.freedom_of_choice.pending}`;
    } else {
        fields.validity = "timing validity not evaluated (tabletop geometry)";
    }
    if (options.demo && stats?.current_settings) {
        const show = (value: number | null | undefined) =>
            value === null || value === undefined ? "—" : String(value);
        fields.demo_settings =
            `alice: ${show(stats.current_settings.alice)} · bob: ${show(stats.current_settings.bob)}`;
    } else {
        fields.demo_settings = "";
    }
    const totals = settingTotals(stats);
    for (let ia = 0; ia < 2; ia++) {
        for (let ib = 0; ib < 2; ib++) {
            fields[`n_${ia}${ib}`] = stats ? String(totals[ia][ib]) : "—";
        }
    }
    return fields;
}

export function applyToDom(
    state: ConsoleState,
    root: Document | HTMLElement,
    nowMs: number,
    options: RenderOptions = {},
): void {
    const fields = renderFields(state, nowMs, options);
    for (const [id, text] of Object.entries(fields)) {
        const node = (root as Document).getElementById
            ? (root as Document).getElementById(id)
            : (root as HTMLElement).querySelector(`#${id}`);
        if (node) node.textContent = text;
    }
}
