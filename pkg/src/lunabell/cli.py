"""Command-line interface.

Subcommands are thin wrappers: simulate/replay drive the session runner,
serve launches the FastAPI service, budget/spacetime/analyze print
reports in text plus machine-readable key=value lines, and coincide/
histogram operate on binary tag and pair files. File-heavy passes run
in-process; everything the CLI prints comes from the same core package
the service wraps.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import UndefinedCorrelationError, chsh
from .config import (
    SESSION_PRESETS,
    ConfigError,
    SessionConfig,
    load_config_file,
    parse_override,
    preset_config,
)
from .linkbudget import (
    PRESETS as BUDGET_PRESETS,
    ArmBudget,
    budget_report,
    render_budget_table,
    scenario_total,
)
from .session import run_headless, run_replay
from .session.headless import analyze_artifacts
from .session.records import read_choice_log
from .spacetime import GeometryConfig, TimingBudget, window_report
from .tagstream import (
    CoincidenceConfig,
    delta_histogram,
    find_coincidences,
    read_pairs,
    read_tags,
    write_pairs,
)


def _print_key_values(pairs: dict[str, object]) -> None:
    for key, value in pairs.items():
        print(f"{key}={value}")


def _build_session_config(args) -> SessionConfig:
    config = preset_config(args.preset)
    overrides: dict[str, object] = {}
    if getattr(args, "config", None):
        overrides.update(load_config_file(args.config))
    for item in getattr(args, "set", None) or []:
        key, value = parse_override(item)
        overrides[key] = value
    if overrides:
        config = config.with_overrides(overrides)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        updates["duration_s"] = args.duration
    if updates:
        config = replace(config, **updates)
    return config


def cmd_simulate(args) -> int:
    config = _build_session_config(args)
    choices = None
    if args.choices is not None:
        log_hash, choices = read_choice_log(args.choices)
        config = replace(config, choice_source="replay")
        if log_hash != config.config_hash():
            print(
                f"note: choice log was recorded under config {log_hash[:12]}…, "
                f"current config is {config.config_hash()[:12]}…",
                file=sys.stderr,
            )
    report = run_headless(config, out_dir=args.out, choices=choices)
    print(report.render_text())
    print()
    _print_key_values(report.key_values())
    return 0


def cmd_replay(args) -> int:
    report = run_replay(args.run)
    print(report.render_text())
    print()
    _print_key_values(report.key_values())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app()
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_budget(args) -> int:
    if args.preset not in BUDGET_PRESETS:
        print(f"unknown budget preset {args.preset!r}; available: {sorted(BUDGET_PRESETS)}",
              file=sys.stderr)
        return 2
    scenario = BUDGET_PRESETS[args.preset]
    overrides: dict[str, str] = {}
    if args.config:
        overrides.update({k: str(v) for k, v in load_config_file(args.config).items()})
    for item in args.set or []:
        key, value = parse_override(item)
        overrides[key] = value
    if overrides:
        arms = []
        for arm in scenario.arms:
            values = {
                "geometric_db": arm.geometric_db,
                "atmospheric_db": arm.atmospheric_db,
                "optics_db": arm.optics_db,
                "detector_db": arm.detector_db,
            }
            for component in values:
                key = f"{arm.label}.{component}"
                if key in overrides:
                    values[component] = float(overrides[key])
            arms.append(ArmBudget(label=arm.label, **values))
        scenario = scenario_total(tuple(arms))
    print(render_budget_table(scenario))
    print()
    _print_key_values(budget_report(scenario))
    return 0


def cmd_spacetime(args) -> int:
    timing = TimingBudget(
        reaction_time_s=max(0.0, args.delta_t - args.system_delay),
        system_delay_s=args.system_delay,
        delta_t_s=args.delta_t,
    )
    geometry = GeometryConfig(
        side_length_km=args.side, use_paper_rounding=not args.no_paper_rounding
    )
    report = window_report(timing, geometry)
    print(
        f"triangle side {report['side_length_km']:.3g} km, one-way light time "
        f"{report['one_way_light_time_s']:.4f} s (exact {report['exact_light_time_s']:.4f} s)"
    )
    print(f"choice-to-ready delay budget: {report['delta_t_s']:.3f} s")
    print(f"valid photons must arrive within {report['locality_window_s']:.2f} s "
          f"(locality) / {report['freedom_of_choice_window_s']:.2f} s (setting independence)")
    print()
    _print_key_values(report)
    return 0


def cmd_coincide(args) -> int:
    config = CoincidenceConfig(window_ps=args.window)
    if args.chunked:
        n_alice, n_bob, pairs = _coincide_chunked(args.alice, args.bob, config)
    else:
        alice = read_tags(args.alice)
        bob = read_tags(args.bob)
        n_alice, n_bob = len(alice), len(bob)
        pairs = find_coincidences(alice, bob, config)
    if args.out:
        write_pairs(args.out, pairs)
    kv = {
        "alice_tags": n_alice,
        "bob_tags": n_bob,
        "pairs": len(pairs),
        "window_ps": args.window,
    }
    if len(pairs):
        deltas = pairs.deltas
        kv["delta_mean_ps"] = float(np.mean(deltas))
        hist = delta_histogram(deltas, bin_width_ps=args.bin, span_ps=args.window)
        fwhm = hist.fwhm_ps
        kv["delta_fwhm_ps"] = "undefined" if fwhm is None else f"{fwhm:.2f}"
        if args.histogram:
            _print_histogram(hist)
    _print_key_values(kv)
    return 0


def _coincide_chunked(alice_path, bob_path, config):
    """Stream both files through the incremental matcher, never holding
    more than a chunk plus the open component tail in memory."""
    from lunabell.tagstream import PairSet, StreamingCoincider, iter_tag_chunks

    coincider = StreamingCoincider(config)
    parts = []
    live = {
        "a": iter_tag_chunks(alice_path, chunk_records=1 << 18),
        "b": iter_tag_chunks(bob_path, chunk_records=1 << 18),
    }
    counts = {"a": 0, "b": 0}
    fronts = {"a": -1, "b": -1}
    while live:
        # always refill the side whose frontier lags, so carried state
        # stays bounded even for very unequal densities
        if len(live) == 2:
            side = "a" if fronts["a"] <= fronts["b"] else "b"
        else:
            side = next(iter(live))
        try:
            times, channels = next(live[side])
        except StopIteration:
            del live[side]
            parts.append(coincider.finish_alice() if side == "a" else coincider.finish_bob())
            continue
        counts[side] += times.size
        if times.size:
            fronts[side] = int(times[-1])
        if side == "a":
            parts.append(coincider.push_alice(times, channels))
        else:
            parts.append(coincider.push_bob(times, channels))
    return counts["a"], counts["b"], PairSet.concatenate(parts)


def _print_histogram(hist) -> None:
    peak = hist.counts.max() if hist.counts.size else 0
    scale = 60.0 / peak if peak else 0.0
    for center, count in zip(hist.bin_centers_ps, hist.counts):
        if count:
            print(f"{center:>10.1f} ps {count:>8d} {'#' * int(count * scale)}")


def cmd_histogram(args) -> int:
    pairs = read_pairs(args.pairs)
    hist = delta_histogram(pairs.deltas, bin_width_ps=args.bin, span_ps=args.span)
    _print_histogram(hist)
    fwhm = hist.fwhm_ps
    _print_key_values(
        {
            "pairs": len(pairs),
            "entries": hist.total,
            "bin_ps": args.bin,
            "span_ps": args.span,
            "fwhm_ps": "undefined" if fwhm is None else f"{fwhm:.2f}",
        }
    )
    return 0


def cmd_analyze(args) -> int:
    config = _build_session_config(args)
    counts, n_pairs, n_counted = analyze_artifacts(args.pairs, args.choices, config)
    kv: dict[str, object] = {"pairs": n_pairs, "counted": n_counted}
    print("counts per setting pair (rows N++ N+- N-+ N--):")
    for ia in range(2):
        for ib in range(2):
            quad = counts.outcome_quad((ia, ib))
            print(f"  a{ia} b{ib}: {quad[0]:>8} {quad[1]:>8} {quad[2]:>8} {quad[3]:>8}")
    try:
        result = chsh(counts)
    except UndefinedCorrelationError:
        print("S undefined: at least one setting pair has no counts")
        kv["s_value"] = "undefined"
        _print_key_values(kv)
        return 1
    print(f"\nS = {result.s_value:.4f} +/- {result.sigma:.4f}   ({result.sign_convention})")
    for pair, est in zip(((0, 0), (0, 1), (1, 0), (1, 1)), result.correlations):
        print(f"  E(a{pair[0]}, b{pair[1]}) = {est.value:+.4f} +/- {est.sigma:.4f}  (n={est.n})")
    kv.update(
        {
            "s_value": f"{result.s_value:.6f}",
            "s_sigma": f"{result.sigma:.6f}",
        }
    )
    _print_key_values(kv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lunabell",
        description="Bell-test simulator and analysis toolkit for extremely high-loss channels",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_options(p):
        p.add_argument("--preset", default="paper_lab_103db", choices=sorted(SESSION_PRESETS))
        p.add_argument("--config", type=Path, help="INI config file with section.key overrides")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="run a headless session and print its report")
    add_scenario_options(p)
    p.add_argument("--duration", type=float, default=None, help="run length in seconds")
    p.add_argument("--out", type=Path, default=None, help="run directory for artifacts")
    p.add_argument("--choices", type=Path, default=None,
                   help="replay a recorded choice log instead of the seeded schedule")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="recompute a report from persisted run artifacts")
    p.add_argument("--run", type=Path, required=True, help="run directory")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="start the live session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("budget", help="render a link-budget table")
    p.add_argument("--preset", default="paper_table1", choices=sorted(BUDGET_PRESETS))
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--set", action="append", metavar="ARM.COMPONENT=DB")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("spacetime", help="print loophole validity windows")
    p.add_argument("--delta-t", dest="delta_t", type=float, default=0.5)
    p.add_argument("--system-delay", dest="system_delay", type=float, default=0.05)
    p.add_argument("--side", type=float, default=3.8e5, help="triangle side, km")
    p.add_argument("--no-paper-rounding", action="store_true",
                   help="use side/c instead of the rounded 1.28 s light time")
    p.set_defaults(func=cmd_spacetime)

    p = sub.add_parser("coincide", help="match two tag files into coincidence pairs")
    p.add_argument("alice", type=Path)
    p.add_argument("bob", type=Path)
    p.add_argument("--window", type=int, default=500, help="coincidence window, ps")
    p.add_argument("--bin", type=float, default=10.0, help="histogram bin width, ps")
    p.add_argument("--out", type=Path, default=None, help="write pairs to this file")
    p.add_argument("--histogram", action="store_true", help="print the delta histogram")
    p.add_argument("--chunked", action="store_true",
                   help="stream the files in bounded memory instead of loading them whole")
    p.set_defaults(func=cmd_coincide)

    p = sub.add_parser("histogram", help="histogram pair time differences")
    p.add_argument("--pairs", type=Path, required=True)
    p.add_argument("--bin", type=float, default=10.0)
    p.add_argument("--span", type=float, default=500.0)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("analyze", help="CHSH analysis of a pair file plus choice log")
    p.add_argument("--pairs", type=Path, required=True)
    p.add_argument("--choices", type=Path, required=True)
    add_scenario_options(p)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
