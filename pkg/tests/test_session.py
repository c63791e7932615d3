import json
import math

import numpy as np
import pytest

from lunabell.config import ConfigError, SessionConfig, preset_config
from lunabell.photonics import PS_PER_S
from lunabell.session import run_headless, run_replay
from lunabell.session.engine import EngineError, SessionEngine
from lunabell.session.headless import (
    CHOICES_FILE,
    REPORT_JSON,
    generate_choice_schedule,
    run_engine,
)
from lunabell.session.live import LiveSession, ManualClock, SessionError
from lunabell.session.records import (
    ChoiceEvent,
    PersistenceError,
    read_choice_log,
    read_report,
    write_choice_log,
)


def fast_config(**overrides):
    base = dict(
        preset="paper_lab_103db",
        mode="headless",
        seed=3,
        duration_s=30.0,
        arm_loss_db=(20.0, 20.0),
        pair_rate_hz=1e4,
        visibility=0.95,
    )
    base.update(overrides)
    return SessionConfig(**base)


class TestConfig:
    def test_interactive_forbids_compression(self):
        with pytest.raises(ConfigError):
            SessionConfig(mode="interactive", time_compression=2.0)

    def test_headless_allows_compression(self):
        cfg = SessionConfig(mode="headless", time_compression=4.0)
        assert cfg.time_compression == 4.0

    def test_flat_round_trip(self):
        cfg = fast_config(geometry_enabled=True, include_singles=True)
        back = SessionConfig.from_flat(cfg.to_flat())
        assert back == cfg
        assert back.config_hash() == cfg.config_hash()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            SessionConfig().with_overrides({"run.bogus": 1})

    def test_presets(self):
        lab = preset_config("paper_lab_103db")
        assert lab.pair_loss_db == 103.0
        table = preset_config("earth_moon_table1")
        assert table.pair_loss_db == 101.5
        assert table.geometry_enabled
        live = preset_config("interactive_90db")
        assert live.pair_loss_db == 90.0

    def test_hash_changes_with_content(self):
        a = fast_config()
        b = fast_config(seed=4)
        assert a.config_hash() != b.config_hash()


class TestChoiceLog:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "choices.log"
        choices = [
            ChoiceEvent(1_000_000, "alice", 0),
            ChoiceEvent(2_000_000, "bob", 1),
            ChoiceEvent(3_000_000, "alice", 1),
        ]
        write_choice_log(path, "cafe" * 16, choices)
        got_hash, got = read_choice_log(path)
        assert got_hash == "cafe" * 16
        assert got == choices

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.log"
        path.write_text("not a header\n")
        with pytest.raises(PersistenceError, match="line 1"):
            read_choice_log(path)

    def test_truncated_line_reports_number(self, tmp_path):
        path = tmp_path / "trunc.log"
        path.write_text("# lunabell-choices v1\n# config_hash: x\n123 alice\n")
        with pytest.raises(PersistenceError, match="line 3"):
            read_choice_log(path)

    def test_out_of_order_rejected(self, tmp_path):
        path = tmp_path / "ooo.log"
        path.write_text(
            "# lunabell-choices v1\n# config_hash: x\n200 alice 0\n100 alice 1\n"
        )
        with pytest.raises(PersistenceError, match="line 4"):
            read_choice_log(path)


class TestHeadlessRun:
    def test_zero_duration_empty_report(self):
        report = run_headless(fast_config(duration_s=0.0))
        assert report.n_trials == 0
        assert report.n_coincidences == 0
        assert report.s_value is None

    def test_same_seed_bit_identical(self):
        r1 = run_headless(fast_config())
        r2 = run_headless(fast_config())
        assert r1.report_hash() == r2.report_hash()
        assert r1.canonical_json(include_volatile=False) == r2.canonical_json(
            include_volatile=False
        )

    def test_different_seed_differs(self):
        r1 = run_headless(fast_config(seed=1))
        r2 = run_headless(fast_config(seed=2))
        assert r1.report_hash() != r2.report_hash()

    def test_choice_rate_in_band(self):
        config = fast_config(duration_s=100.0)
        schedule = generate_choice_schedule(config)
        alice = [c.t_choice_ps for c in schedule if c.observer == "alice"]
        gaps = np.diff(alice) / PS_PER_S
        assert gaps.min() >= 1.0 / config.choice_rate_max_hz - 1e-9
        assert gaps.max() <= 1.0 / config.choice_rate_min_hz + 1e-9
        # 2-4 Hz means roughly 3 choices per second
        assert 2.0 <= len(alice) / 100.0 <= 4.0

    def test_tallies_sum_to_trials(self):
        report = run_headless(fast_config(geometry_enabled=True, duration_s=60.0))
        assert report.locality.total == report.n_trials
        assert report.freedom_of_choice.total == report.n_trials

    def test_counts_consistency(self):
        report = run_headless(fast_config())
        assert int(np.sum(report.counts_table)) == report.n_counted_coincidences
        assert report.n_counted_coincidences <= report.n_coincidences

    def test_expected_close_to_observed(self):
        report = run_headless(fast_config(duration_s=200.0))
        # 1e4/s through 40 dB pair loss = 1/s
        assert report.expected_coincidences == pytest.approx(200.0, rel=1e-6)
        assert abs(report.n_coincidences - 200.0) < 5 * math.sqrt(200.0)


class TestPersistenceAndReplay:
    def test_run_dir_contents(self, tmp_path):
        out = tmp_path / "run"
        run_headless(fast_config(), out_dir=out)
        for name in (
            "config.json",
            "choices.log",
            "tags_alice.bin",
            "tags_bob.bin",
            "pairs.bin",
            "report.json",
            "report.txt",
        ):
            assert (out / name).exists(), name

    def test_replay_hash_identical(self, tmp_path):
        out = tmp_path / "run"
        original = run_headless(fast_config(), out_dir=out)
        replayed = run_replay(out)
        assert replayed.report_hash() == original.report_hash()

    def test_replay_many_random_configs(self, tmp_path):
        rng = np.random.default_rng(0)
        for k in range(10):
            config = fast_config(
                seed=int(rng.integers(0, 2**31)),
                duration_s=float(rng.uniform(5, 40)),
                arm_loss_db=(float(rng.uniform(5, 25)), float(rng.uniform(5, 25))),
                visibility=float(rng.uniform(0.5, 1.0)),
                geometry_enabled=bool(rng.random() < 0.5),
                include_singles=bool(rng.random() < 0.5),
            )
            out = tmp_path / f"run{k}"
            original = run_headless(config, out_dir=out)
            assert run_replay(out).report_hash() == original.report_hash()

    def test_stored_report_matches(self, tmp_path):
        out = tmp_path / "run"
        original = run_headless(fast_config(), out_dir=out)
        stored = read_report(out / REPORT_JSON)
        assert stored.report_hash() == original.report_hash()

    def test_raw_sampling_mode_replays(self, tmp_path):
        out = tmp_path / "raw_run"
        config = fast_config(sampling_mode="raw", include_singles=True, duration_s=10.0)
        original = run_headless(config, out_dir=out)
        assert run_replay(out).report_hash() == original.report_hash()

    def test_live_session_persists_replayable_run(self, tmp_path):
        out = tmp_path / "live_run"
        config = fast_config(
            mode="interactive", duration_s=20.0, arm_loss_db=(10.0, 10.0), choice_source="live"
        )
        live = LiveSession(config, clock=ManualClock(), session_id="persist", persist_dir=out)
        live.claim("alice")
        live.claim("bob")
        clock: ManualClock = live.clock
        rng = np.random.default_rng(5)
        for _ in range(30):
            clock.advance(0.3)
            live.tick()
            live.submit_choice("alice", int(rng.integers(0, 2)))
            live.submit_choice("bob", int(rng.integers(0, 2)))
        report = live.close()
        # the persisted interactive run replays exactly like a headless one
        assert (out / "report.json").exists()
        assert run_replay(out).report_hash() == report.report_hash()

    def test_tampered_choice_log_detected(self, tmp_path):
        out = tmp_path / "run"
        run_headless(fast_config(), out_dir=out)
        log = out / CHOICES_FILE
        text = log.read_text().replace("v1", "v999")
        log.write_text(text)
        with pytest.raises(PersistenceError):
            run_replay(out)

    def test_truncated_choice_log_detected(self, tmp_path):
        out = tmp_path / "run"
        run_headless(fast_config(), out_dir=out)
        log = out / CHOICES_FILE
        lines = log.read_text().splitlines()
        lines[5] = "garbage line here"
        log.write_text("\n".join(lines))
        with pytest.raises(PersistenceError, match="line 6"):
            run_replay(out)


class TestSpacetimeValidity:
    def test_no_locality_ok_trial_exceeds_window(self):
        config = fast_config(
            geometry_enabled=True, duration_s=120.0, pair_rate_hz=1e5, arm_loss_db=(15.0, 15.0)
        )
        engine = run_engine(config, generate_choice_schedule(config))
        engine.finalize()
        for timeline in (engine.timeline_a, engine.timeline_b):
            for i, det in enumerate(timeline.first_det_ps):
                if det < 0 or not timeline.loc_ok[i]:
                    continue
                prepared = timeline._prepared[i + 1]
                assert det - prepared <= 0.78 * PS_PER_S

    def test_flight_time_applied(self):
        config = fast_config(geometry_enabled=True, duration_s=5.0, pair_rate_hz=1e4)
        engine = run_engine(config, [])
        engine.finalize()
        alice, _ = engine.assembled_streams()
        if len(alice):
            # arrivals lag emissions by one light time (~1.2675 s)
            assert int(alice.times.min()) >= 1.26 * PS_PER_S

    def test_validity_filters_counts(self):
        # a long pause between choices with geometry on strands photons
        # beyond the locality window, so some pairs are found but not counted
        config = fast_config(
            geometry_enabled=True,
            duration_s=60.0,
            pair_rate_hz=2e5,
            arm_loss_db=(10.0, 10.0),
            choice_rate_min_hz=0.05,
            choice_rate_max_hz=0.1,
        )
        report = run_headless(config)
        assert report.n_coincidences > 0
        assert report.n_counted_coincidences < report.n_coincidences


class TestEngineEventOrdering:
    def test_choice_in_simulated_past_rejected(self):
        engine = SessionEngine(fast_config())
        engine.advance_to(PS_PER_S)  # 1 s
        with pytest.raises(EngineError, match="simulated past"):
            engine.add_choice("alice", 0, 0)

    def test_backwards_advance_rejected(self):
        engine = SessionEngine(fast_config())
        engine.advance_to(1000)
        with pytest.raises(EngineError):
            engine.advance_to(500)

    def test_out_of_order_choice_rejected(self):
        engine = SessionEngine(fast_config())
        engine.add_choice("alice", 5_000_000, 0)
        with pytest.raises(EngineError):
            engine.add_choice("alice", 4_000_000, 1)

    def test_segmentation_independent(self):
        # advancing in many small steps equals one big step, draw for draw
        config = fast_config(duration_s=10.0, include_singles=True, dark_rate_hz=(50.0, 50.0))
        schedule = generate_choice_schedule(config)

        one = run_engine(config, schedule)
        one.finalize()
        a_one, b_one = one.assembled_streams()

        many = SessionEngine(config)
        events = iter(schedule)
        pending = next(events, None)
        duration_ps = int(round(config.duration_s * PS_PER_S))
        step = duration_ps // 1000
        for t in range(0, duration_ps + step, step):
            t = min(t, duration_ps)
            while pending is not None and pending.t_choice_ps <= t:
                many.advance_to(pending.t_choice_ps)
                many.add_choice(pending.observer, pending.t_choice_ps, pending.setting)
                pending = next(events, None)
            many.advance_to(t)
            if t % (50 * step) == 0:
                many.stats()  # interleaved releases must not change anything
        many.finalize()
        a_many, b_many = many.assembled_streams()

        assert np.array_equal(a_one.times, a_many.times)
        assert np.array_equal(a_one.channels, a_many.channels)
        assert np.array_equal(b_one.times, b_many.times)
        assert np.array_equal(b_one.channels, b_many.channels)


class TestLiveSession:
    def make_live(self, **overrides):
        config = fast_config(mode="interactive", **overrides)
        clock = ManualClock()
        return LiveSession(config, clock=clock, session_id="test"), clock

    def test_arming_requires_both_roles(self):
        live, clock = self.make_live()
        assert live.state == "waiting"
        live.claim("alice")
        assert live.state == "waiting"
        live.claim("bob")
        assert live.state == "running"

    def test_role_conflict(self):
        live, _ = self.make_live()
        live.claim("alice")
        with pytest.raises(SessionError) as err:
            live.claim("alice")
        assert err.value.code == "role-conflict"

    def test_reconnect_allowed_and_pauses(self):
        live, clock = self.make_live()
        live.claim("alice")
        live.claim("bob")
        clock.advance(1.0)
        assert live.session_time_s() == pytest.approx(1.0)
        live.disconnect("bob")
        assert live.state == "paused"
        clock.advance(5.0)
        # paused time does not accumulate
        assert live.session_time_s() == pytest.approx(1.0)
        live.claim("bob")
        assert live.state == "running"
        clock.advance(1.0)
        assert live.session_time_s() == pytest.approx(2.0)

    def test_choice_before_armed_rejected(self):
        live, _ = self.make_live()
        live.claim("alice")
        with pytest.raises(SessionError) as err:
            live.submit_choice("alice", 0)
        assert err.value.code == "not-armed"

    def test_duplicate_choice_id_ignored(self):
        live, clock = self.make_live()
        live.claim("alice")
        live.claim("bob")
        clock.advance(0.5)
        assert live.submit_choice("alice", 1, choice_id="c1") is True
        assert live.submit_choice("alice", 1, choice_id="c1") is False
        assert live.roles["alice"].n_choices == 1

    def test_no_choices_zero_trials(self):
        live, clock = self.make_live(duration_s=5.0)
        live.claim("alice")
        live.claim("bob")
        clock.advance(10.0)
        live.tick()
        report = live.report
        assert report is not None  # duration reached auto-closes
        assert report.n_trials == 0

    def test_seq_strictly_increases(self):
        live, clock = self.make_live()
        live.claim("alice")
        live.claim("bob")
        seqs = []
        for _ in range(5):
            clock.advance(0.2)
            seqs.append(live.tick()["seq"])
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)

    def test_final_stats_equal_report_counts(self):
        live, clock = self.make_live(duration_s=20.0, arm_loss_db=(10.0, 10.0))
        live.claim("alice")
        live.claim("bob")
        rng = np.random.default_rng(1)
        for _ in range(40):
            clock.advance(0.25)
            live.submit_choice("alice", int(rng.integers(0, 2)))
            live.submit_choice("bob", int(rng.integers(0, 2)))
            live.tick()
        report = live.close()
        final = live.stats_snapshot()
        assert final["counts_table"] == report.counts_table
        assert final["n_pairs"] == report.n_coincidences
        assert final["n_counted"] == report.n_counted_coincidences

    def test_cross_mode_equivalence(self):
        # a scripted live feed reproduces the headless run with the same
        # choice schedule exactly
        config = fast_config(duration_s=15.0, arm_loss_db=(12.0, 12.0))
        schedule = generate_choice_schedule(config)

        headless_report = run_headless(config, choices=schedule)

        live_cfg = fast_config(
            mode="interactive", duration_s=15.0, arm_loss_db=(12.0, 12.0), choice_source="live"
        )
        live = LiveSession(live_cfg, clock=ManualClock(), session_id="equiv")
        live.claim("alice")
        live.claim("bob")
        clock: ManualClock = live.clock
        for event in schedule:
            clock.set(event.t_choice_ps / PS_PER_S)
            live.tick()
            live.submit_choice(event.observer, event.setting)
        clock.set(15.0)
        live.tick()
        live_report = live.report or live.close()

        assert live_report.counts_table == headless_report.counts_table
        assert live_report.n_coincidences == headless_report.n_coincidences
        assert live_report.s_value == headless_report.s_value
        assert live_report.n_trials == headless_report.n_trials

    def test_closed_session_rejects_everything(self):
        live, clock = self.make_live()
        live.claim("alice")
        live.claim("bob")
        live.close()
        with pytest.raises(SessionError):
            live.claim("alice")
        with pytest.raises(SessionError):
            live.submit_choice("alice", 0)


class TestTrialRecords:
    def test_prepared_time_follows_system_delay(self):
        config = fast_config(duration_s=20.0)
        engine = run_engine(config, generate_choice_schedule(config))
        engine.finalize()
        for record in engine.trial_records():
            assert record.prepared_time_s == pytest.approx(
                record.choice_time_s + config.system_delay_s, abs=1e-9
            )

    def test_outcomes_only_on_detected_trials(self):
        config = fast_config(duration_s=30.0)
        engine = run_engine(config, generate_choice_schedule(config))
        engine.finalize()
        records = engine.trial_records()
        detected = [r for r in records if r.detection_time_s is not None]
        undetected = [r for r in records if r.detection_time_s is None]
        assert all(r.outcome in (1, -1) for r in detected)
        assert all(r.outcome is None for r in undetected)
        assert len(records) == engine.timeline_a.n_trials + engine.timeline_b.n_trials
