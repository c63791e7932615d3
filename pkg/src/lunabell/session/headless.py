"""Headless runs, deterministic replay, and run-directory persistence."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from ..analysis import SettingCounts
from ..config import SessionConfig
from ..photonics import PS_PER_S
from ..tagstream import (
    CoincidenceConfig,
    find_coincidences,
    read_pairs,
    read_tags,
    write_pairs,
    write_tags,
)
from .engine import SessionEngine
from .records import (
    ChoiceEvent,
    PersistenceError,
    RunReport,
    read_choice_log,
    read_config_snapshot,
    write_choice_log,
    write_config_snapshot,
    write_report,
)

CONFIG_FILE = "config.json"
CHOICES_FILE = "choices.log"
TAGS_ALICE_FILE = "tags_alice.bin"
TAGS_BOB_FILE = "tags_bob.bin"
PAIRS_FILE = "pairs.bin"
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


def generate_choice_schedule(config: SessionConfig) -> list[ChoiceEvent]:
    """Random per-observer keypress schedule.

    Inter-press gaps are uniform between 1/rate_max and 1/rate_min (the
    2-4 Hz default), settings are fair coin flips. Substreams 0 and 1 of
    the run seed are reserved for alice and bob so the engine's own
    streams stay untouched.
    """
    # integer domain tag keeps the schedule stream disjoint from the
    # engine's spawned substreams for the same seed
    seq = np.random.SeedSequence((config.seed, 0xC401CE5))
    events: list[ChoiceEvent] = []
    duration_ps = int(round(config.duration_s * PS_PER_S))
    for observer, child in zip(("alice", "bob"), seq.spawn(2)):
        rng = np.random.Generator(np.random.PCG64(child))
        gap_lo = 1.0 / config.choice_rate_max_hz
        gap_hi = 1.0 / config.choice_rate_min_hz
        t = 0.0
        times: list[int] = []
        while True:
            t += rng.uniform(gap_lo, gap_hi)
            t_ps = int(round(t * PS_PER_S))
            if t_ps >= duration_ps:
                break
            times.append(t_ps)
        settings = (rng.random(len(times)) < 0.5).astype(int)
        events += [ChoiceEvent(t, observer, int(s)) for t, s in zip(times, settings)]
    events.sort(key=lambda e: (e.t_choice_ps, e.observer))
    return events


def run_engine(config: SessionConfig, choices: list[ChoiceEvent]) -> SessionEngine:
    """Feed a complete choice schedule through a fresh engine."""
    engine = SessionEngine(config)
    for event in choices:
        engine.add_choice(event.observer, event.t_choice_ps, event.setting)
    engine.advance_to(int(round(config.duration_s * PS_PER_S)))
    return engine


def run_headless(
    config: SessionConfig,
    out_dir: str | Path | None = None,
    choices: list[ChoiceEvent] | None = None,
) -> RunReport:
    """Run a full simulated session and optionally persist its artifacts.

    The choice schedule defaults to the seeded random generator; an
    explicit schedule (e.g. replayed from a log) exercises the same engine
    path, which is what makes headless and interactive runs comparable.
    """
    started = time.monotonic()
    if choices is None:
        if config.choice_source == "rng":
            choices = generate_choice_schedule(config)
        else:
            raise PersistenceError(
                f"choice_source={config.choice_source!r} needs an explicit schedule"
            )
    engine = run_engine(config, choices)
    report = engine.finalize(wall_time_s=time.monotonic() - started)
    if out_dir is not None:
        persist_run(Path(out_dir), config, engine, report)
    return report


def persist_run(
    out_dir: Path, config: SessionConfig, engine: SessionEngine, report: RunReport
) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_config_snapshot(out_dir / CONFIG_FILE, config)
        write_choice_log(out_dir / CHOICES_FILE, config.config_hash(), engine.choices)
        alice, bob = engine.assembled_streams()
        write_tags(out_dir / TAGS_ALICE_FILE, alice)
        write_tags(out_dir / TAGS_BOB_FILE, bob)
        write_pairs(out_dir / PAIRS_FILE, engine.assembled_pairs())
        write_report(out_dir / REPORT_JSON, report)
        (out_dir / REPORT_TEXT).write_text(report.render_text() + "\n")
    except OSError as e:
        raise PersistenceError(f"cannot write run artifacts under {out_dir}: {e}") from e


def run_replay(run_dir: str | Path) -> RunReport:
    """Recompute a run's report from its persisted artifacts.

    Pairs are re-derived from the stored tag files with the batch
    coincidence pass, settings and validity from the choice log; the
    rebuilt report must hash-match the original.
    """
    run_dir = Path(run_dir)
    config = read_config_snapshot(run_dir / CONFIG_FILE)
    log_hash, choices = read_choice_log(run_dir / CHOICES_FILE)
    if log_hash != config.config_hash():
        raise PersistenceError(
            f"{run_dir}: choice log config hash {log_hash[:12]} does not match config snapshot"
        )
    alice = read_tags(run_dir / TAGS_ALICE_FILE)
    bob = read_tags(run_dir / TAGS_BOB_FILE)

    # rebuild through an engine shell: timelines and stats processing are
    # identical, only the tags come from disk instead of fresh draws
    engine = SessionEngine(config)
    for event in choices:
        engine.add_choice(event.observer, event.t_choice_ps, event.setting)
    pairs = find_coincidences(alice, bob, CoincidenceConfig(config.coincidence_window_ps))
    report = engine.replay_report(pairs)

    stored_pairs = read_pairs(run_dir / PAIRS_FILE)
    if len(stored_pairs) != len(pairs) or not (
        np.array_equal(stored_pairs.a_times, pairs.a_times)
        and np.array_equal(stored_pairs.b_times, pairs.b_times)
    ):
        raise PersistenceError(f"{run_dir}: stored pair file disagrees with recomputed pairs")
    return report


def analyze_artifacts(
    pairs_path: str | Path,
    choices_path: str | Path,
    config: SessionConfig,
) -> tuple[SettingCounts, int, int]:
    """Setting-resolved counts from a pair file plus a choice log.

    Returns (counts, pairs found, pairs counted); with geometry enabled
    only fully valid pairs are counted.
    """
    pairs = read_pairs(pairs_path)
    _, choices = read_choice_log(choices_path)
    engine = SessionEngine(config)
    for event in choices:
        engine.add_choice(event.observer, event.t_choice_ps, event.setting)
    engine.ingest_pairs(pairs)
    return engine.counts, engine.n_pairs, engine.n_counted
