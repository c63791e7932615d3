// Display formatting. Numbers round to three decimals with trailing
// zeros trimmed, so the canonical snapshot renders as "S = 2.28 ± 0.061".

export function formatNumber(x: number): string {
    const fixed = x.toFixed(3);
    return fixed.replace(/\.?0+$/, "");
}

export function formatS(sValue: number | null, sSigma: number | null): string {
    if (sValue === null || sSigma === null) {
        return "S = —";
    }
    return `S = ${formatNumber(sValue)} ± ${formatNumber(sSigma)}`;
}

export function formatCount(n: number | null | undefined): string {
    return n === null || n === undefined ? "—" : String(n);
}

export function formatSeconds(t: number): string {
    if (t < 60) return `${t.toFixed(1)} s`;
    const minutes = Math.floor(t / 60);
    const seconds = Math.floor(t % 60);
    return `${minutes}:${String(seconds).padStart(2, "0")} min`;
}

export function paceLabel(hz: number | null): string {
    if (hz === null) return "press a key to choose";
    if (hz < 2) return `${hz.toFixed(1)} Hz — press faster (target 2–4 Hz)`;
    if (hz > 4) return `${hz.toFixed(1)} Hz — slow down (target 2–4 Hz)`;
    return `${hz.toFixed(1)} Hz — good pace`;
}
