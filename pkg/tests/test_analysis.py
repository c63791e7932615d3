import math

import numpy as np
import pytest

from lunabell.analysis import (
    QUANTUM_MAX,
    SETTING_PAIRS,
    AnalysisError,
    ChshResult,
    NoViolationError,
    SettingCounts,
    UndefinedCorrelationError,
    bootstrap_sigma,
    chsh,
    correlation,
    deterministic_strategy_values,
    expected_coincidences,
    ideal_s_value,
    local_bound_oracle,
    time_to_violation,
)
from lunabell.photonics import AnalyzerSettings, SourceSpec, joint_outcome_probabilities


def ideal_counts(visibility: float, n_per_setting: int, angles=AnalyzerSettings()) -> SettingCounts:
    """Counts proportional to the exact model probabilities (no sampling)."""
    src = SourceSpec(visibility=visibility)
    table = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for ia, theta_a in enumerate(angles.alice_angles_deg):
        for ib, theta_b in enumerate(angles.bob_angles_deg):
            p = joint_outcome_probabilities(theta_a, theta_b, src)
            table[ia, ib] = np.rint(p * n_per_setting).astype(np.int64)
    return SettingCounts(table)


class TestCorrelation:
    def test_symmetric_counts_zero(self):
        est = correlation(10, 10, 10, 10)
        assert est.value == 0.0
        assert est.sigma == pytest.approx(1 / math.sqrt(40), rel=1e-12)
        assert est.n == 40

    def test_perfect_correlation(self):
        est = correlation(20, 0, 0, 20)
        assert est.value == 1.0
        assert est.sigma == 0.0

    def test_model_correlation_large_n(self):
        # counts tabulated from the outcome law at V=0.806, delta=22.5 deg
        src = SourceSpec(visibility=0.806)
        p = joint_outcome_probabilities(0.0, 22.5, src)
        n = 4_000_000
        est = correlation(
            int(p[0, 0] * n), int(p[0, 1] * n), int(p[1, 0] * n), int(p[1, 1] * n)
        )
        assert est.value == pytest.approx(0.570, abs=1e-3)

    def test_zero_total_undefined(self):
        with pytest.raises(UndefinedCorrelationError):
            correlation(0, 0, 0, 0)

    def test_negative_count_rejected(self):
        with pytest.raises(AnalysisError):
            correlation(-1, 0, 0, 0)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            quad = rng.integers(0, 50, size=4)
            if quad.sum() == 0:
                continue
            est = correlation(*quad.tolist())
            assert -1.0 <= est.value <= 1.0
            assert est.sigma >= 0.0


class TestChsh:
    def test_uncorrelated_counts_zero(self):
        table = np.full((2, 2, 2, 2), 25, dtype=np.int64)
        result = chsh(SettingCounts(table))
        assert result.s_value == 0.0

    def test_ideal_visibility_one_reaches_quantum_max(self):
        result = chsh(ideal_counts(1.0, 8_000_000))
        assert result.s_value == pytest.approx(QUANTUM_MAX, abs=1e-6)

    def test_reference_visibility_gives_228(self):
        result = chsh(ideal_counts(0.806, 8_000_000))
        assert result.s_value == pytest.approx(2.28, abs=1e-3)

    def test_sigma_is_quadrature_sum(self):
        counts = ideal_counts(0.8, 500)
        result = chsh(counts)
        expect = math.sqrt(sum(c.sigma**2 for c in result.correlations))
        assert result.sigma == pytest.approx(expect, rel=1e-12)

    def test_undefined_correlation_propagates(self):
        table = np.full((2, 2, 2, 2), 10, dtype=np.int64)
        table[1, 1] = 0
        with pytest.raises(UndefinedCorrelationError):
            chsh(SettingCounts(table))

    def test_flipping_one_side_everywhere_preserves_s(self):
        counts = ideal_counts(0.9, 1000)
        flipped = counts.table[:, :, ::-1, :]  # alice outcome labels swapped
        s1 = chsh(counts).s_value
        s2 = chsh(SettingCounts(flipped)).s_value
        assert abs(s1) == pytest.approx(abs(s2), rel=1e-12)

    def test_algebraic_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            table = rng.integers(1, 100, size=(2, 2, 2, 2))
            result = chsh(SettingCounts(table))
            assert abs(result.s_value) <= 4.0


class TestLocalBoundOracle:
    def test_exhaustive_maximum_is_two(self):
        assert local_bound_oracle() == 2.0

    def test_sixteen_strategies_each_zero_or_two(self):
        values = deterministic_strategy_values()
        assert len(values) == 16
        assert all(abs(v) in (0.0, 2.0) for v in values)
        # enumeration shows the bound is saturated by every strategy:
        # one of b0-b1, b0+b1 vanishes, the other has magnitude 2
        assert set(abs(v) for v in values) == {2.0}

    def test_restricted_subset_still_bounded(self):
        # strategies whose two alice outputs agree form a subset
        import itertools

        for a, b0, b1 in itertools.product((1, -1), repeat=3):
            s = a * b0 - a * b1 + a * b0 + a * b1
            assert abs(s) <= 2.0

    def test_local_bound_below_model_maximum(self):
        assert local_bound_oracle() < ideal_s_value(1.0)
        assert ideal_s_value(1.0) == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-12)


class TestExpectedCoincidences:
    def test_reference_campaign(self):
        assert expected_coincidences(1e9, 103.0, 10800.0) == pytest.approx(541.28, abs=0.1)

    def test_zero_duration(self):
        assert expected_coincidences(1e9, 103.0, 0.0) == 0.0

    def test_no_loss(self):
        assert expected_coincidences(123.0, 0.0, 10.0) == pytest.approx(1230.0, rel=1e-12)


class TestTimeToViolation:
    def _closed_form(self, v, rate, loss_db, k):
        # independent re-derivation of the documented formula
        e = v / math.sqrt(2.0)
        margin = 2.0 * math.sqrt(2.0) * v - 2.0
        n_per_setting = 4.0 * k * k * (1.0 - e * e) / margin**2
        return 4.0 * n_per_setting / (rate * 10 ** (-loss_db / 10.0))

    def test_reference_campaign(self):
        t = time_to_violation(0.806, 1e9, 103.0, 3.0)
        assert t == pytest.approx(2.47e4, rel=0.05)
        assert t == pytest.approx(self._closed_form(0.806, 1e9, 103.0, 3.0), rel=1e-12)

    def test_k_to_zero_limit(self):
        assert time_to_violation(0.806, 1e9, 103.0, 1e-9) < 1e-12

    def test_twenty_db_more_loss_is_hundredfold(self):
        t1 = time_to_violation(0.9, 1e9, 80.0, 3.0)
        t2 = time_to_violation(0.9, 1e9, 100.0, 3.0)
        assert t2 / t1 == pytest.approx(100.0, rel=1e-9)

    def test_no_violation_below_threshold(self):
        with pytest.raises(NoViolationError):
            time_to_violation(1.0 / math.sqrt(2.0), 1e9, 103.0, 3.0)

    def test_bad_k_rejected(self):
        with pytest.raises(AnalysisError):
            time_to_violation(0.9, 1e9, 103.0, 0.0)


class TestEstimatorConsistency:
    def test_reported_sigma_matches_spread(self):
        # simulate many runs at fixed per-setting count; empirical sd of S
        # must agree with the mean reported sigma within 20%
        rng = np.random.default_rng(12345)
        visibility = 0.806
        n_per = 200
        src = SourceSpec(visibility=visibility)
        angles = AnalyzerSettings()
        probs = {
            (ia, ib): joint_outcome_probabilities(
                angles.alice_angles_deg[ia], angles.bob_angles_deg[ib], src
            ).reshape(-1)
            for ia, ib in SETTING_PAIRS
        }
        s_values, sigmas = [], []
        for _ in range(300):
            table = np.zeros((2, 2, 2, 2), dtype=np.int64)
            for (ia, ib), p in probs.items():
                table[ia, ib] = rng.multinomial(n_per, p).reshape(2, 2)
            result = chsh(SettingCounts(table))
            s_values.append(result.s_value)
            sigmas.append(result.sigma)
        empirical = float(np.std(s_values, ddof=1))
        reported = float(np.mean(sigmas))
        assert abs(reported - empirical) / empirical < 0.20

    def test_bootstrap_agrees_with_analytic(self):
        rng = np.random.default_rng(99)
        counts = ideal_counts(0.806, 140)
        result = chsh(counts)
        boot = bootstrap_sigma(counts, n_boot=400, rng=rng)
        assert abs(boot - result.sigma) / result.sigma < 0.20


class TestSettingCounts:
    def test_from_outcomes(self):
        counts = SettingCounts.from_outcomes(
            np.array([0, 0, 1, 1]),
            np.array([0, 1, 0, 1]),
            np.array([1, -1, 1, -1]),
            np.array([1, 1, -1, -1]),
        )
        assert counts.table[0, 0, 0, 0] == 1
        assert counts.table[0, 1, 1, 0] == 1
        assert counts.table[1, 0, 0, 1] == 1
        assert counts.table[1, 1, 1, 1] == 1
        assert counts.total == 4

    def test_addition(self):
        a = ideal_counts(0.8, 100)
        combined = a + a
        assert combined.total == 2 * a.total

    def test_negative_rejected(self):
        with pytest.raises(AnalysisError):
            SettingCounts(np.full((2, 2, 2, 2), -1))
