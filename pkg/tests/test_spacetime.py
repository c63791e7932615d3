import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lunabell.spacetime import (
    GeometryConfig,
    LoopholeWindow,
    SpacetimeError,
    SpacetimeEvent,
    TimingBudget,
    admissible_window,
    classify_interval,
    lagrange_positions,
    separation_km,
    validate_trial,
    window_report,
)

GEO = GeometryConfig()
TIMING = TimingBudget(delta_t_s=0.5)


class TestLagrangePositions:
    def test_equilateral_at_reference_side(self):
        earth, moon, source = lagrange_positions(GeometryConfig(side_length_km=3.8e5))
        for e1, e2 in ((earth, moon), (earth, source), (moon, source)):
            assert separation_km(e1, e2) == pytest.approx(3.8e5, rel=1e-9)

    def test_one_way_light_time(self):
        cfg = GeometryConfig(side_length_km=3.8e5, use_paper_rounding=False)
        assert cfg.one_way_light_time_s == pytest.approx(1.2675, abs=5e-4)
        # rounded figure stays compatible with the exact one
        assert abs(GEO.one_way_light_time_s - cfg.one_way_light_time_s) < 0.02

    def test_side_one_km(self):
        cfg = GeometryConfig(side_length_km=1.0, use_paper_rounding=False)
        assert cfg.one_way_light_time_s == pytest.approx(1.0 / 299792.458, rel=1e-12)

    def test_nonpositive_side_rejected(self):
        with pytest.raises(SpacetimeError):
            GeometryConfig(side_length_km=0.0)
        with pytest.raises(SpacetimeError):
            GeometryConfig(side_length_km=-1.0)

    def test_relabel_distance_multiset_invariant(self):
        earth, moon, source = lagrange_positions(GEO)
        # mirroring across the earth-source axis swaps the triangular points
        mirrored = SpacetimeEvent("moon", (moon.position[0], -moon.position[1], 0.0), 0.0)
        base = sorted(
            (separation_km(earth, moon), separation_km(earth, source), separation_km(moon, source))
        )
        flipped = sorted(
            (
                separation_km(earth, mirrored),
                separation_km(earth, source),
                separation_km(mirrored, source),
            )
        )
        assert flipped == pytest.approx(base, rel=1e-12)


def event(x_km, t_s, label="e"):
    return SpacetimeEvent(label, (x_km, 0.0, 0.0), t_s)


class TestClassifyInterval:
    def test_identical_events_light_like(self):
        e = event(0.0, 0.0)
        assert classify_interval(e, e) == "light-like"

    def test_simultaneous_separated_space_like(self):
        assert classify_interval(event(0, 0), event(3.8e5, 0)) == "space-like"

    def test_one_second_apart_still_space_like(self):
        assert classify_interval(event(0, 0), event(3.8e5, 1.0)) == "space-like"

    def test_slow_signal_time_like(self):
        assert classify_interval(event(0, 0), event(1.0, 10.0)) == "time-like"

    def test_exactly_on_cone_light_like(self):
        c = 299792.458
        assert classify_interval(event(0, 0), event(c * 2.0, 2.0)) == "light-like"

    @settings(max_examples=1000, deadline=None)
    @given(
        x1=st.floats(-1e6, 1e6),
        x2=st.floats(-1e6, 1e6),
        t1=st.floats(-10, 10),
        t2=st.floats(-10, 10),
    )
    def test_symmetric_and_total(self, x1, x2, t1, t2):
        e1, e2 = event(x1, t1, "a"), event(x2, t2, "b")
        c1 = classify_interval(e1, e2)
        c2 = classify_interval(e2, e1)
        assert c1 == c2
        assert c1 in ("space-like", "time-like", "light-like")


class TestAdmissibleWindow:
    def test_locality_reference(self):
        win = admissible_window("locality", TIMING, GEO)
        assert win.window_s == 0.78

    def test_freedom_of_choice_reference(self):
        win = admissible_window("freedom-of-choice", TIMING, GEO)
        assert win.window_s == 2.06

    def test_zero_delay_uses_full_light_time(self):
        win = admissible_window("locality", TimingBudget(delta_t_s=0.0, system_delay_s=0.0), GEO)
        assert win.window_s == 1.28

    def test_combined_is_min(self):
        win = admissible_window("combined", TIMING, GEO)
        assert win.window_s == 0.78

    def test_clamped_to_zero(self):
        timing = TimingBudget(delta_t_s=5.0)
        for loophole in ("locality", "freedom-of-choice", "combined"):
            assert admissible_window(loophole, timing, GEO).window_s == 0.0

    @given(st.floats(0.0, 4.0), st.floats(0.0, 4.0))
    @settings(max_examples=300, deadline=None)
    def test_foc_geq_locality_and_monotone(self, dt1, dt2):
        t_lo, t_hi = sorted((dt1, dt2))
        lo = TimingBudget(delta_t_s=t_lo, system_delay_s=0.0)
        hi = TimingBudget(delta_t_s=t_hi, system_delay_s=0.0)
        assert (
            admissible_window("freedom-of-choice", lo, GEO).window_s
            >= admissible_window("locality", lo, GEO).window_s
        )
        # windows shrink as the choice-to-ready delay grows
        for loophole in ("locality", "freedom-of-choice"):
            assert (
                admissible_window(loophole, hi, GEO).window_s
                <= admissible_window(loophole, lo, GEO).window_s
            )
        combined = admissible_window("combined", lo, GEO).window_s
        locality = admissible_window("locality", lo, GEO).window_s
        assert combined == locality

    def test_negative_window_construction_rejected(self):
        with pytest.raises(SpacetimeError):
            LoopholeWindow("locality", -0.1)


class TestValidateTrial:
    def test_within_both_windows(self):
        v = validate_trial(0.0, 0.5, TIMING, GEO)
        assert v.locality_ok and v.foc_ok

    def test_locality_exceeded_only(self):
        v = validate_trial(0.0, 1.0, TIMING, GEO)
        assert not v.locality_ok
        assert v.foc_ok

    def test_zero_delay(self):
        v = validate_trial(0.0, 0.0, TIMING, GEO)
        assert v.locality_ok and v.foc_ok

    def test_detection_before_preparation_rejected(self):
        with pytest.raises(SpacetimeError):
            validate_trial(1.0, 0.5, TIMING, GEO)


class TestTimingBudget:
    def test_delta_t_below_system_delay_rejected(self):
        with pytest.raises(SpacetimeError):
            TimingBudget(system_delay_s=0.1, delta_t_s=0.05)

    def test_negative_rejected(self):
        with pytest.raises(SpacetimeError):
            TimingBudget(reaction_time_s=-0.1)


def test_window_report_keys():
    report = window_report(TIMING, GEO)
    assert report["locality_window_s"] == 0.78
    assert report["freedom_of_choice_window_s"] == 2.06
    assert report["earth_moon_km"] == pytest.approx(3.8e5, rel=1e-9)
