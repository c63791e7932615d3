"""Deterministic session core consumed by both headless and live runs.

The engine is a single-writer state machine fed a time-ordered event
sequence: setting choices and clock advances. Photon emissions are drawn
from lazy gap-based Poisson streams, so the random draw sequence depends
only on the event sequence, never on how the caller slices its clock
advances. Feeding the same choices to a headless run (one big advance)
and a live session (many small advances) therefore produces bit-identical
tag streams, pairs and reports.

Random substreams are spawned from the run seed in a fixed order:
pairs/both, alice singles, bob singles, raw-mode categories, outcomes,
alice jitter, bob jitter, and one stream per dark channel. Jitter draws
are clipped to +/- 8 sigma so a released tag can never be overtaken by a
later emission, which keeps incremental coincidence matching exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..analysis import (
    ChshResult,
    SettingCounts,
    UndefinedCorrelationError,
    chsh,
)
from ..config import SCHEMA_VERSION, SessionConfig
from ..linkbudget import transmittance
from ..photonics import PS_PER_S
from ..spacetime import admissible_window
from ..tagstream import (
    CHANNEL_ALICE_MINUS,
    CHANNEL_ALICE_PLUS,
    CHANNEL_BOB_MINUS,
    CHANNEL_BOB_PLUS,
    CoincidenceConfig,
    PairSet,
    StreamingCoincider,
    TagStream,
    accidental_rate,
)
from .records import ChoiceEvent, RunReport, TrialRecord, ValidityTally

JITTER_CLIP_SIGMA = 8.0

_KIND_BOTH, _KIND_A_ONLY, _KIND_B_ONLY = 0, 1, 2


class EngineError(ValueError):
    """Event fed out of order or into an inconsistent engine state."""


class _LazyPoisson:
    """Homogeneous Poisson stream drawn one exponential gap at a time.

    Gap-based draws make the emitted sequence independent of how the
    caller segments time. Gaps round to >= 1 ps, so times are strictly
    increasing.
    """

    def __init__(self, rate_hz: float, rng: np.random.Generator, start_ps: int = 0):
        self.rate_hz = rate_hz
        self.rng = rng
        self._next_ps: int | None = None
        self._cursor_ps = start_ps

    def _draw_next(self) -> None:
        gap_s = self.rng.exponential(1.0 / self.rate_hz)
        gap_ps = max(1, int(round(gap_s * PS_PER_S)))
        self._cursor_ps += gap_ps
        self._next_ps = self._cursor_ps

    def pop_until(self, t_ps: int) -> list[int]:
        """All emission times <= t_ps, consuming them."""
        if self.rate_hz <= 0:
            return []
        out: list[int] = []
        while True:
            if self._next_ps is None:
                self._draw_next()
            if self._next_ps > t_ps:
                return out
            out.append(self._next_ps)
            self._next_ps = None


class _Timeline:
    """Per-observer prepared-setting history plus trial bookkeeping.

    Entry 0 is the idle hardware state (setting 0 prepared at t=0) and is
    not a trial; entries 1..n correspond to choices.
    """

    def __init__(self, initial_setting: int = 0):
        self._prepared = [0]
        self._settings = [initial_setting]
        self._choices = [-1]
        self._dirty = True
        self._prepared_arr = np.zeros(1, dtype=np.int64)
        self._settings_arr = np.zeros(1, dtype=np.int64)
        # per-trial first-detection bookkeeping, aligned with entries 1..
        self.first_det_ps: list[int] = []
        self.outcomes: list[int] = []
        self.loc_ok: list[bool | None] = []
        self.foc_ok: list[bool | None] = []

    @property
    def n_trials(self) -> int:
        return len(self._prepared) - 1

    def last_choice_ps(self) -> int:
        return self._choices[-1]

    def last_chosen_setting(self) -> int | None:
        """Setting of the most recent choice; None before the first one."""
        if self.n_trials == 0:
            return None
        return int(self._settings[-1])

    def add(self, choice_ps: int, prepared_ps: int, setting: int) -> None:
        self._prepared.append(prepared_ps)
        self._settings.append(setting)
        self._choices.append(choice_ps)
        self.first_det_ps.append(-1)
        self.outcomes.append(0)
        self.loc_ok.append(None)
        self.foc_ok.append(None)
        self._dirty = True

    def _refresh(self) -> None:
        if self._dirty:
            self._prepared_arr = np.asarray(self._prepared, dtype=np.int64)
            self._settings_arr = np.asarray(self._settings, dtype=np.int64)
            self._dirty = False

    def entry_index(self, times_ps: np.ndarray) -> np.ndarray:
        self._refresh()
        return np.searchsorted(self._prepared_arr, times_ps, side="right") - 1

    def entry_index_scalar(self, t_ps: int) -> int:
        self._refresh()
        return int(np.searchsorted(self._prepared_arr, t_ps, side="right")) - 1

    def setting_of_entries(self, entries: np.ndarray) -> np.ndarray:
        self._refresh()
        return self._settings_arr[entries]

    def setting_at_scalar(self, t_ps: int) -> int:
        idx = self.entry_index_scalar(t_ps)
        return int(self._settings_arr[idx])

    def prepared_of_entries(self, entries: np.ndarray) -> np.ndarray:
        self._refresh()
        return self._prepared_arr[entries]

    def trial_records(self, observer: str) -> list[TrialRecord]:
        records = []
        for k in range(1, len(self._prepared)):
            i = k - 1
            det = self.first_det_ps[i]
            records.append(
                TrialRecord(
                    observer=observer,
                    choice_time_s=self._choices[k] / PS_PER_S,
                    prepared_time_s=self._prepared[k] / PS_PER_S,
                    setting_index=int(self._settings[k]),
                    detection_time_s=None if det < 0 else det / PS_PER_S,
                    outcome=None if det < 0 else self.outcomes[i],
                    locality_ok=self.loc_ok[i],
                    foc_ok=self.foc_ok[i],
                )
            )
        return records

    def validity_tally(self, which: str) -> ValidityTally:
        flags = self.loc_ok if which == "locality" else self.foc_ok
        tally = ValidityTally()
        for f in flags:
            if f is None:
                tally.pending += 1
            elif f:
                tally.ok += 1
            else:
                tally.fail += 1
        return tally


@dataclass
class EngineStats:
    """Cumulative statistics snapshot (engine view, no sequence number)."""

    advanced_to_s: float
    n_choices_alice: int
    n_choices_bob: int
    n_pairs: int
    n_counted: int
    counts_table: list
    s_value: float | None
    s_sigma: float | None
    pairs_locality_ok: int
    pairs_foc_ok: int
    pairs_fully_valid: int
    locality: dict
    freedom_of_choice: dict
    current_settings: dict


class SessionEngine:
    """Single-writer simulation core; see module docstring for contracts."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.source = config.source_spec()
        self.detectors = config.detector_specs()
        self.angles = config.analyzer_settings()
        self.geometry = config.geometry_config()
        self.timing = config.timing_budget()
        self.window = CoincidenceConfig(config.coincidence_window_ps)

        seq = np.random.SeedSequence(config.seed)
        children = seq.spawn(11)

        def gen(s):
            return np.random.Generator(np.random.PCG64(s))

        self._rng_pairs = gen(children[0])
        self._rng_singles_a = gen(children[1])
        self._rng_singles_b = gen(children[2])
        self._rng_category = gen(children[3])
        self._rng_outcomes = gen(children[4])
        self._rng_jitter_a = gen(children[5])
        self._rng_jitter_b = gen(children[6])
        self._rng_dark = [gen(children[7 + i]) for i in range(4)]

        self.p_a = transmittance(config.arm_loss_db[0]) * self.detectors[0].efficiency
        self.p_b = transmittance(config.arm_loss_db[1]) * self.detectors[1].efficiency
        rate = self.source.pair_rate_hz
        if config.sampling_mode == "thinned":
            self._both = _LazyPoisson(rate * self.p_a * self.p_b, self._rng_pairs)
            self._only_a = _LazyPoisson(rate * self.p_a * (1.0 - self.p_b), self._rng_singles_a)
            self._only_b = _LazyPoisson(rate * (1.0 - self.p_a) * self.p_b, self._rng_singles_b)
            self._raw = None
        else:
            self._raw = _LazyPoisson(rate, self._rng_pairs)
            self._both = self._only_a = self._only_b = None

        if self.geometry is not None:
            delay_s = self.geometry.exact_light_time_s
            self.delay_ps = (int(round(delay_s * PS_PER_S)),) * 2
            self._loc_window_ps = int(round(admissible_window("locality", self.timing, self.geometry).window_s * PS_PER_S))
            self._foc_window_ps = int(round(admissible_window("freedom-of-choice", self.timing, self.geometry).window_s * PS_PER_S))
        else:
            self.delay_ps = (0, 0)
            self._loc_window_ps = self._foc_window_ps = None

        self._dark_streams = [
            _LazyPoisson(self.detectors[0].dark_rate_hz, self._rng_dark[0]),
            _LazyPoisson(self.detectors[0].dark_rate_hz, self._rng_dark[1]),
            _LazyPoisson(self.detectors[1].dark_rate_hz, self._rng_dark[2]),
            _LazyPoisson(self.detectors[1].dark_rate_hz, self._rng_dark[3]),
        ]
        self._dark_channels = (
            CHANNEL_ALICE_PLUS,
            CHANNEL_ALICE_MINUS,
            CHANNEL_BOB_PLUS,
            CHANNEL_BOB_MINUS,
        )

        # correlation per (alice setting, bob setting), fixed angles
        self._corr = np.zeros((2, 2))
        for ia in range(2):
            for ib in range(2):
                delta = self.angles.alice_angles_deg[ia] - self.angles.bob_angles_deg[ib]
                self._corr[ia, ib] = (
                    self.source.state_sign
                    * self.source.visibility
                    * math.cos(2.0 * math.radians(delta))
                )

        self._sigma_a = self.detectors[0].sigma_ps
        self._sigma_b = self.detectors[1].sigma_ps
        self._margin_a = int(math.ceil(JITTER_CLIP_SIGMA * self._sigma_a)) + 1
        self._margin_b = int(math.ceil(JITTER_CLIP_SIGMA * self._sigma_b)) + 1

        self.timeline_a = _Timeline()
        self.timeline_b = _Timeline()
        self.advanced_to_ps = 0
        self.choices: list[ChoiceEvent] = []

        self._buf_a: list[tuple[int, int]] = []
        self._buf_b: list[tuple[int, int]] = []
        self._released_a: list[TagStream] = []
        self._released_b: list[TagStream] = []
        self._release_frontier_a = 0
        self._release_frontier_b = 0
        self._coincider = StreamingCoincider(self.window)
        self._pair_chunks: list[PairSet] = []

        self.counts = SettingCounts()
        self.n_pairs = 0
        self.n_counted = 0
        self.pairs_locality_ok = 0
        self.pairs_foc_ok = 0
        self.pairs_fully_valid = 0
        self._finalized = False

    # --- event feed ---

    def add_choice(self, observer: str, t_choice_ps: int, setting: int) -> None:
        """Record a setting choice; its prepared time must not predate
        already-simulated time."""
        if self._finalized:
            raise EngineError("engine already finalized")
        timeline = self.timeline_a if observer == "alice" else self.timeline_b
        system_delay_ps = int(round(self.config.system_delay_s * PS_PER_S))
        prepared_ps = t_choice_ps + system_delay_ps
        if t_choice_ps < timeline.last_choice_ps():
            raise EngineError(
                f"{observer} choice at {t_choice_ps} ps precedes previous choice"
            )
        if prepared_ps < self.advanced_to_ps:
            raise EngineError(
                f"{observer} choice prepared at {prepared_ps} ps lies in simulated past"
                f" (advanced to {self.advanced_to_ps} ps)"
            )
        timeline.add(t_choice_ps, prepared_ps, setting)
        self.choices.append(ChoiceEvent(t_choice_ps, observer, setting))

    def advance_to(self, t_ps: int) -> None:
        """Simulate emissions in (advanced_to, t]."""
        if self._finalized:
            raise EngineError("engine already finalized")
        if t_ps < self.advanced_to_ps:
            raise EngineError(f"cannot advance backwards to {t_ps} ps")
        events: list[tuple[int, int]] = []
        if self._raw is not None:
            for e in self._raw.pop_until(t_ps):
                u = self._rng_category.random(2)
                hit_a, hit_b = u[0] < self.p_a, u[1] < self.p_b
                if hit_a and hit_b:
                    events.append((e, _KIND_BOTH))
                elif hit_a:
                    events.append((e, _KIND_A_ONLY))
                elif hit_b:
                    events.append((e, _KIND_B_ONLY))
        else:
            for e in self._both.pop_until(t_ps):
                events.append((e, _KIND_BOTH))
            if self.config.include_singles:
                for e in self._only_a.pop_until(t_ps):
                    events.append((e, _KIND_A_ONLY))
                for e in self._only_b.pop_until(t_ps):
                    events.append((e, _KIND_B_ONLY))
            events.sort()
        if self._raw is not None and not self.config.include_singles:
            events = [(e, k) for e, k in events if k == _KIND_BOTH]
        for e, kind in events:
            self._emit(e, kind)
        self.advanced_to_ps = t_ps

    def _emit(self, e_ps: int, kind: int) -> None:
        delay_a, delay_b = self.delay_ps
        if kind == _KIND_BOTH:
            arr_a = e_ps + delay_a
            arr_b = e_ps + delay_b
            ia = self.timeline_a.setting_at_scalar(arr_a)
            ib = self.timeline_b.setting_at_scalar(arr_b)
            corr = self._corr[ia, ib]
            u = self._rng_outcomes.random(2)
            s_a = 1 if u[0] < 0.5 else -1
            s_b = s_a if u[1] < (1.0 + corr) / 2.0 else -s_a
            self._buf_a.append((self._detect_time(arr_a, self._sigma_a, self._rng_jitter_a),
                                CHANNEL_ALICE_PLUS if s_a > 0 else CHANNEL_ALICE_MINUS))
            self._buf_b.append((self._detect_time(arr_b, self._sigma_b, self._rng_jitter_b),
                                CHANNEL_BOB_PLUS if s_b > 0 else CHANNEL_BOB_MINUS))
        elif kind == _KIND_A_ONLY:
            s_a = 1 if self._rng_outcomes.random() < 0.5 else -1
            self._buf_a.append((self._detect_time(e_ps + delay_a, self._sigma_a, self._rng_jitter_a),
                                CHANNEL_ALICE_PLUS if s_a > 0 else CHANNEL_ALICE_MINUS))
        else:
            s_b = 1 if self._rng_outcomes.random() < 0.5 else -1
            self._buf_b.append((self._detect_time(e_ps + delay_b, self._sigma_b, self._rng_jitter_b),
                                CHANNEL_BOB_PLUS if s_b > 0 else CHANNEL_BOB_MINUS))

    @staticmethod
    def _detect_time(arrival_ps: int, sigma_ps: float, rng: np.random.Generator) -> int:
        if sigma_ps <= 0:
            return arrival_ps
        j = rng.normal(0.0, sigma_ps)
        clip = JITTER_CLIP_SIGMA * sigma_ps
        j = max(-clip, min(clip, j))
        return max(0, arrival_ps + int(round(j)))

    # --- incremental release and pairing ---

    def release(self, final: bool = False) -> None:
        """Move settled tags into the coincidence pass and update stats."""
        delay_a, delay_b = self.delay_ps
        if final:
            # darks cover detector time up to the last simulated instant,
            # which is the configured duration unless the run ended early
            frontier_a = frontier_b = None
            dark_end_a = self.advanced_to_ps + delay_a
            dark_end_b = self.advanced_to_ps + delay_b
        else:
            frontier_a = max(0, self.advanced_to_ps + delay_a - self._margin_a)
            frontier_b = max(0, self.advanced_to_ps + delay_b - self._margin_b)
            dark_end_a, dark_end_b = frontier_a, frontier_b

        for side in ("a", "b"):
            buf = self._buf_a if side == "a" else self._buf_b
            frontier = frontier_a if side == "a" else frontier_b
            dark_end = dark_end_a if side == "a" else dark_end_b
            dark_idx = (0, 1) if side == "a" else (2, 3)
            dark_tags: list[tuple[int, int]] = []
            for k in dark_idx:
                for t in self._dark_streams[k].pop_until(dark_end):
                    dark_tags.append((t, self._dark_channels[k]))
            if frontier is None:
                ready = buf + dark_tags
                buf.clear()
            else:
                ready = [tc for tc in buf if tc[0] < frontier] + dark_tags
                keep = [tc for tc in buf if tc[0] >= frontier]
                buf.clear()
                buf.extend(keep)
            ready.sort()
            times = np.array([t for t, _ in ready], dtype=np.uint64)
            chans = np.array([c for _, c in ready], dtype=np.uint8)
            if side == "a":
                emitted = self._coincider.push_alice(times, chans)
                if len(times):
                    self._released_a.append(TagStream(times, chans))
            else:
                emitted = self._coincider.push_bob(times, chans)
                if len(times):
                    self._released_b.append(TagStream(times, chans))
            self._ingest_pairs(emitted)

        if final:
            self._ingest_pairs(self._coincider.finish_alice())
            self._ingest_pairs(self._coincider.finish_bob())

    def _ingest_pairs(self, pairs: PairSet) -> None:
        if len(pairs) == 0:
            return
        self._pair_chunks.append(pairs)
        self.n_pairs += len(pairs)
        a_t = pairs.a_times.astype(np.int64)
        b_t = pairs.b_times.astype(np.int64)
        s_a = np.where(pairs.a_channels == CHANNEL_ALICE_PLUS, 1, -1)
        s_b = np.where(pairs.b_channels == CHANNEL_BOB_PLUS, 1, -1)
        ent_a = self.timeline_a.entry_index(a_t)
        ent_b = self.timeline_b.entry_index(b_t)
        set_a = self.timeline_a.setting_of_entries(ent_a)
        set_b = self.timeline_b.setting_of_entries(ent_b)

        if self.geometry is not None:
            el_a = a_t - self.timeline_a.prepared_of_entries(ent_a)
            el_b = b_t - self.timeline_b.prepared_of_entries(ent_b)
            loc_a = el_a <= self._loc_window_ps
            loc_b = el_b <= self._loc_window_ps
            foc_a = el_a <= self._foc_window_ps
            foc_b = el_b <= self._foc_window_ps
            loc_pair = loc_a & loc_b
            foc_pair = foc_a & foc_b
            counted = loc_pair & foc_pair
            self.pairs_locality_ok += int(loc_pair.sum())
            self.pairs_foc_ok += int(foc_pair.sum())
            self.pairs_fully_valid += int(counted.sum())
        else:
            loc_a = loc_b = foc_a = foc_b = None
            counted = np.ones(len(pairs), dtype=bool)
            self.pairs_locality_ok += len(pairs)
            self.pairs_foc_ok += len(pairs)
            self.pairs_fully_valid += len(pairs)

        oa = (s_a < 0).astype(np.int64)
        ob = (s_b < 0).astype(np.int64)
        np.add.at(self.counts.table, (set_a[counted], set_b[counted], oa[counted], ob[counted]), 1)
        self.n_counted += int(counted.sum())

        self._attribute_trials(self.timeline_a, ent_a, a_t, s_a, loc_a, foc_a)
        self._attribute_trials(self.timeline_b, ent_b, b_t, s_b, loc_b, foc_b)

    def _attribute_trials(self, timeline, entries, times, signs, loc, foc) -> None:
        for k in range(entries.size):
            trial = int(entries[k]) - 1
            if trial < 0:
                continue  # idle pre-choice state is not a trial
            if timeline.first_det_ps[trial] >= 0:
                continue
            timeline.first_det_ps[trial] = int(times[k])
            timeline.outcomes[trial] = int(signs[k])
            if self.geometry is not None:
                timeline.loc_ok[trial] = bool(loc[k])
                timeline.foc_ok[trial] = bool(foc[k])

    # --- results ---

    def current_chsh(self) -> ChshResult | None:
        try:
            return chsh(self.counts)
        except UndefinedCorrelationError:
            return None

    def stats(self) -> EngineStats:
        """Cumulative statistics; flushes settled tags first.

        After finalize() everything is already flushed, so the snapshot is
        exact; before that, pairs lag the frontier by one jitter margin.
        """
        if not self._finalized:
            self.release(final=False)
        return self._snapshot()

    def _snapshot(self) -> EngineStats:
        result = self.current_chsh()
        return EngineStats(
            advanced_to_s=self.advanced_to_ps / PS_PER_S,
            n_choices_alice=self.timeline_a.n_trials,
            n_choices_bob=self.timeline_b.n_trials,
            n_pairs=self.n_pairs,
            n_counted=self.n_counted,
            counts_table=self.counts.table.tolist(),
            s_value=None if result is None else result.s_value,
            s_sigma=None if result is None else result.sigma,
            pairs_locality_ok=self.pairs_locality_ok,
            pairs_foc_ok=self.pairs_foc_ok,
            pairs_fully_valid=self.pairs_fully_valid,
            locality=self._merged_tally("locality"),
            freedom_of_choice=self._merged_tally("foc"),
            current_settings={
                "alice": self.timeline_a.last_chosen_setting(),
                "bob": self.timeline_b.last_chosen_setting(),
            },
        )

    def _merged_tally(self, which: str) -> dict:
        t_a = self.timeline_a.validity_tally("locality" if which == "locality" else "foc")
        t_b = self.timeline_b.validity_tally("locality" if which == "locality" else "foc")
        return {
            "ok": t_a.ok + t_b.ok,
            "fail": t_a.fail + t_b.fail,
            "pending": t_a.pending + t_b.pending,
        }

    def trial_records(self) -> list[TrialRecord]:
        records = self.timeline_a.trial_records("alice")
        records += self.timeline_b.trial_records("bob")
        records.sort(key=lambda r: (r.choice_time_s, r.observer))
        return records

    def finalize(self, wall_time_s: float = 0.0) -> RunReport:
        """Flush everything and build the final report."""
        if not self._finalized:
            self.release(final=True)
            self._finalized = True
        return self._build_report(wall_time_s)

    def replay_report(self, pairs: PairSet, wall_time_s: float = 0.0) -> RunReport:
        """Build a report from externally matched pairs without simulating.

        Used by the replay path: timelines must already hold the choice
        log; the pairs come from the persisted tag files.
        """
        if self._finalized or self.n_pairs:
            raise EngineError("replay requires a fresh engine")
        self._ingest_pairs(pairs)
        self.advanced_to_ps = int(round(self.config.duration_s * PS_PER_S))
        self._finalized = True
        return self._build_report(wall_time_s)

    def ingest_pairs(self, pairs: PairSet) -> None:
        """Attribute externally matched pairs to settings and trials."""
        self._ingest_pairs(pairs)

    def assembled_streams(self) -> tuple[TagStream, TagStream]:
        """Full released tag streams (call after finalize)."""
        def cat(parts: list[TagStream]) -> TagStream:
            if not parts:
                return TagStream.empty()
            return TagStream(
                np.concatenate([p.times for p in parts]),
                np.concatenate([p.channels for p in parts]),
            )

        return cat(self._released_a), cat(self._released_b)

    def assembled_pairs(self) -> PairSet:
        return PairSet.concatenate(self._pair_chunks)

    def _build_report(self, wall_time_s: float) -> RunReport:
        result = self.current_chsh()
        correlations = None
        if result is not None:
            correlations = [
                {
                    "alice_setting": pair[0],
                    "bob_setting": pair[1],
                    "value": est.value,
                    "sigma": est.sigma,
                    "n": est.n,
                }
                for pair, est in zip(((0, 0), (0, 1), (1, 0), (1, 1)), result.correlations)
            ]
        rate = self.source.pair_rate_hz
        singles_a_hz = rate * self.p_a + 2.0 * self.detectors[0].dark_rate_hz
        singles_b_hz = rate * self.p_b + 2.0 * self.detectors[1].dark_rate_hz
        tally_loc_a = self.timeline_a.validity_tally("locality")
        tally_loc_b = self.timeline_b.validity_tally("locality")
        tally_foc_a = self.timeline_a.validity_tally("foc")
        tally_foc_b = self.timeline_b.validity_tally("foc")
        locality = ValidityTally(
            ok=tally_loc_a.ok + tally_loc_b.ok,
            fail=tally_loc_a.fail + tally_loc_b.fail,
            pending=tally_loc_a.pending + tally_loc_b.pending,
        )
        foc = ValidityTally(
            ok=tally_foc_a.ok + tally_foc_b.ok,
            fail=tally_foc_a.fail + tally_foc_b.fail,
            pending=tally_foc_a.pending + tally_foc_b.pending,
        )
        return RunReport(
            schema_version=SCHEMA_VERSION,
            mode=self.config.mode,
            seed=self.config.seed,
            preset=self.config.preset,
            config_hash=self.config.config_hash(),
            duration_s=self.config.duration_s,
            pair_loss_db=self.config.pair_loss_db,
            geometry_enabled=self.geometry is not None,
            n_choices_alice=self.timeline_a.n_trials,
            n_choices_bob=self.timeline_b.n_trials,
            n_trials=self.timeline_a.n_trials + self.timeline_b.n_trials,
            n_coincidences=self.n_pairs,
            n_counted_coincidences=self.n_counted,
            expected_coincidences=rate * self.p_a * self.p_b * self.config.duration_s,
            accidental_rate_hz=accidental_rate(
                singles_a_hz, singles_b_hz, self.config.coincidence_window_ps
            ),
            locality=locality,
            freedom_of_choice=foc,
            pairs_locality_ok=self.pairs_locality_ok,
            pairs_foc_ok=self.pairs_foc_ok,
            pairs_fully_valid=self.pairs_fully_valid,
            counts_table=self.counts.table.tolist(),
            s_value=None if result is None else result.s_value,
            s_sigma=None if result is None else result.sigma,
            correlations=correlations,
            sign_convention="" if result is None else result.sign_convention,
            wall_time_s=wall_time_s,
        )
