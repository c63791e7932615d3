import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lunabell.linkbudget import (
    PRESETS,
    ApertureLink,
    ArmBudget,
    LinkBudgetError,
    arm_total,
    budget_report,
    db_from_transmittance,
    geometric_loss_db,
    render_budget_table,
    scenario_total,
    transmittance,
)


class TestGeometricLoss:
    def test_earth_arm_30m_telescope(self):
        loss = geometric_loss_db(ApertureLink(3e-6, 3.8e8, 30.0))
        assert loss == pytest.approx(32.0, abs=0.5)

    def test_moon_arm_2p4m_telescope(self):
        loss = geometric_loss_db(ApertureLink(3e-6, 3.8e8, 2.4))
        assert loss == pytest.approx(53.5, abs=0.5)

    def test_full_capture_clamps_to_zero(self):
        # spot is divergence*distance = 3 m, aperture wider
        assert geometric_loss_db(ApertureLink(3e-6, 1e6, 5.0)) == 0.0

    def test_monotonic_in_distance_and_divergence(self):
        base = geometric_loss_db(ApertureLink(3e-6, 3.8e8, 30.0))
        assert geometric_loss_db(ApertureLink(3e-6, 7.6e8, 30.0)) > base
        assert geometric_loss_db(ApertureLink(6e-6, 3.8e8, 30.0)) > base

    def test_doubling_aperture_gains_six_db(self):
        a = geometric_loss_db(ApertureLink(3e-6, 3.8e8, 15.0))
        b = geometric_loss_db(ApertureLink(3e-6, 3.8e8, 30.0))
        assert a - b == pytest.approx(20.0 * math.log10(2.0), rel=1e-12)

    def test_nonpositive_inputs_rejected(self):
        with pytest.raises(LinkBudgetError):
            ApertureLink(0.0, 1.0, 1.0)
        with pytest.raises(LinkBudgetError):
            ApertureLink(1e-6, -1.0, 1.0)
        with pytest.raises(LinkBudgetError):
            ApertureLink(1e-6, 1.0, 0.0)


class TestArmTotals:
    def test_earth_arm(self):
        arm = ArmBudget("earth", 32.0, 3.0, 6.0, 0.5)
        assert arm_total(arm) == 41.5

    def test_moon_arm(self):
        arm = ArmBudget("moon", 53.5, 0.0, 6.0, 0.5)
        assert arm_total(arm) == 60.0

    def test_all_zero(self):
        assert arm_total(ArmBudget("null", 0.0)) == 0.0

    def test_negative_component_rejected(self):
        with pytest.raises(LinkBudgetError):
            ArmBudget("bad", -1.0)


class TestScenario:
    def test_reference_scenario_total(self):
        scenario = PRESETS["paper_table1"]
        assert scenario.pair_loss_db == 101.5
        assert scenario.arms[0].total_db == 41.5
        assert scenario.arms[1].total_db == 60.0

    def test_lab_preset(self):
        scenario = PRESETS["paper_lab_103db"]
        assert scenario.arms[0].total_db == 51.5
        assert scenario.arms[1].total_db == 51.5
        assert scenario.pair_loss_db == 103.0

    def test_zero_arms(self):
        scenario = scenario_total((ArmBudget("a", 0.0), ArmBudget("b", 0.0)))
        assert scenario.pair_loss_db == 0.0

    def test_permutation_invariant(self):
        a = ArmBudget("a", 10.0, 1.0, 2.0, 3.0)
        b = ArmBudget("b", 20.0, 0.0, 1.0, 0.5)
        assert scenario_total((a, b)).pair_loss_db == scenario_total((b, a)).pair_loss_db

    def test_wrong_arm_count(self):
        with pytest.raises(LinkBudgetError):
            scenario_total((ArmBudget("a", 1.0),))


class TestTransmittance:
    def test_zero_db(self):
        assert transmittance(0.0) == 1.0

    def test_ten_db(self):
        assert transmittance(10.0) == pytest.approx(0.1, rel=1e-12)

    def test_103_db(self):
        assert transmittance(103.0) == pytest.approx(5.01e-11, rel=1e-3)

    def test_negative_rejected(self):
        with pytest.raises(LinkBudgetError):
            transmittance(-1.0)

    @given(st.floats(0.0, 200.0), st.floats(0.0, 200.0))
    @settings(max_examples=300, deadline=None)
    def test_multiplicative(self, a, b):
        assert transmittance(a + b) == pytest.approx(
            transmittance(a) * transmittance(b), rel=1e-12
        )

    @given(st.floats(1e-12, 1.0))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, eta):
        assert transmittance(db_from_transmittance(eta)) == pytest.approx(eta, rel=1e-9)


def test_budget_report_and_table_render():
    scenario = PRESETS["paper_table1"]
    report = budget_report(scenario)
    assert report["pair_loss_db"] == 101.5
    assert report["earth.total_db"] == 41.5
    table = render_budget_table(scenario)
    assert "101.5 dB" in table
    assert "earth" in table and "moon" in table
