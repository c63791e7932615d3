"""Correlation and CHSH statistics from setting-resolved coincidence counts.

Counts live in a 4-dimensional table indexed by (alice setting, bob
setting, alice outcome, bob outcome) with outcome index 0 meaning +1 and
1 meaning -1. Correlations use the standard estimator

    E = (N++ + N-- - N+- - N-+) / N,   sigma_E = sqrt((1 - E^2) / N)

and the four-correlation combination S = E(0,0) - E(0,1) + E(1,0) + E(1,1),
whose sign convention makes the default analyzer angles (0/45 and
22.5/67.5 degrees) yield S = +2*sqrt(2)*V in the ideal model. The planner
inverts the uncertainty model to estimate how long a campaign must run
before a k-sigma violation of the classical bound |S| <= 2 is expected.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .linkbudget import transmittance

SETTING_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))
# which correlations enter S with a minus sign
CHSH_SIGNS = {(0, 0): +1.0, (0, 1): -1.0, (1, 0): +1.0, (1, 1): +1.0}
SIGN_CONVENTION = "S = E(a,b) - E(a,b') + E(a',b) + E(a',b')"

QUANTUM_MAX = 2.0 * math.sqrt(2.0)


class AnalysisError(ValueError):
    """Invalid counts or parameters."""


class UndefinedCorrelationError(AnalysisError):
    """A setting pair has no counts, so its correlation is undefined."""


class NoViolationError(AnalysisError):
    """Visibility too low for the model to exceed the classical bound."""


@dataclass
class SettingCounts:
    """Coincidence counts indexed [alice_setting, bob_setting, a_out, b_out]."""

    table: np.ndarray = field(default_factory=lambda: np.zeros((2, 2, 2, 2), dtype=np.int64))

    def __post_init__(self) -> None:
        self.table = np.asarray(self.table, dtype=np.int64)
        if self.table.shape != (2, 2, 2, 2):
            raise AnalysisError("counts table must have shape (2, 2, 2, 2)")
        if np.any(self.table < 0):
            raise AnalysisError("counts must be >= 0")

    @staticmethod
    def from_outcomes(
        alice_settings: np.ndarray,
        bob_settings: np.ndarray,
        alice_signs: np.ndarray,
        bob_signs: np.ndarray,
    ) -> "SettingCounts":
        """Accumulate per-coincidence settings (0/1) and outcome signs (+/-1)."""
        table = np.zeros((2, 2, 2, 2), dtype=np.int64)
        oa = (np.asarray(alice_signs) < 0).astype(np.int64)
        ob = (np.asarray(bob_signs) < 0).astype(np.int64)
        np.add.at(table, (np.asarray(alice_settings), np.asarray(bob_settings), oa, ob), 1)
        return SettingCounts(table)

    def outcome_quad(self, setting_pair: tuple[int, int]) -> tuple[int, int, int, int]:
        """(N++, N+-, N-+, N--) for one setting pair."""
        sub = self.table[setting_pair]
        return int(sub[0, 0]), int(sub[0, 1]), int(sub[1, 0]), int(sub[1, 1])

    @property
    def total(self) -> int:
        return int(self.table.sum())

    def __add__(self, other: "SettingCounts") -> "SettingCounts":
        return SettingCounts(self.table + other.table)


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    sigma: float
    n: int


@dataclass(frozen=True)
class ChshResult:
    s_value: float
    sigma: float
    correlations: tuple[CorrelationEstimate, CorrelationEstimate, CorrelationEstimate, CorrelationEstimate]
    sign_convention: str = SIGN_CONVENTION

    @property
    def n_total(self) -> int:
        return sum(c.n for c in self.correlations)


def correlation(n_pp: int, n_pm: int, n_mp: int, n_mm: int) -> CorrelationEstimate:
    """Correlation estimate for one setting pair from its four counts."""
    for c in (n_pp, n_pm, n_mp, n_mm):
        if c < 0:
            raise AnalysisError("counts must be >= 0")
    n = n_pp + n_pm + n_mp + n_mm
    if n == 0:
        raise UndefinedCorrelationError("no counts for this setting pair")
    e = (n_pp + n_mm - n_pm - n_mp) / n
    sigma = math.sqrt(max(0.0, 1.0 - e * e) / n)
    return CorrelationEstimate(value=e, sigma=sigma, n=n)


def chsh(counts: SettingCounts) -> ChshResult:
    """Four-correlation CHSH estimate with quadrature-summed uncertainty."""
    estimates = []
    s = 0.0
    var = 0.0
    for pair in SETTING_PAIRS:
        est = correlation(*counts.outcome_quad(pair))
        estimates.append(est)
        s += CHSH_SIGNS[pair] * est.value
        var += est.sigma**2
    return ChshResult(s_value=s, sigma=math.sqrt(var), correlations=tuple(estimates))


def local_bound_oracle() -> float:
    """Maximum |S| over all deterministic local strategies, by enumeration."""
    return max(abs(s) for s in deterministic_strategy_values())


def deterministic_strategy_values() -> list[float]:
    """S of every deterministic assignment (+/-1 per setting per side)."""
    values = []
    for a0, a1, b0, b1 in itertools.product((1, -1), repeat=4):
        outcomes = {(0, 0): a0 * b0, (0, 1): a0 * b1, (1, 0): a1 * b0, (1, 1): a1 * b1}
        values.append(sum(CHSH_SIGNS[p] * outcomes[p] for p in SETTING_PAIRS))
    return values


def ideal_s_value(visibility: float) -> float:
    """Model S at the default optimal angles: 2*sqrt(2)*V."""
    return QUANTUM_MAX * visibility


def expected_coincidences(pair_rate_hz: float, pair_loss_db: float, duration_s: float) -> float:
    """Expected coincidence count: rate * 10^(-loss/10) * duration."""
    if pair_rate_hz < 0 or duration_s < 0:
        raise AnalysisError("rate and duration must be >= 0")
    return pair_rate_hz * transmittance(pair_loss_db) * duration_s


def time_to_violation(
    visibility: float,
    pair_rate_hz: float,
    pair_loss_db: float,
    k_sigma: float,
) -> float:
    """Seconds of running until the expected violation reaches k sigma.

    Assumes the four settings split the collected pairs equally, each
    contributing E = +/- V/sqrt(2). The violation margin 2*sqrt(2)*V - 2
    must exceed k * sigma_S with sigma_S = sqrt(4*(1 - E^2)/N_per_setting),
    giving

        N_per_setting = 4 k^2 (1 - V^2/2) / (2 sqrt(2) V - 2)^2

    and total time = 4*N_per_setting / detected pair rate.
    """
    if k_sigma <= 0:
        raise AnalysisError("k_sigma must be > 0")
    margin = ideal_s_value(visibility) - 2.0
    if margin <= 0:
        raise NoViolationError(
            f"visibility {visibility} cannot violate the classical bound (needs > 1/sqrt(2))"
        )
    e_sq = visibility**2 / 2.0
    n_per_setting = 4.0 * k_sigma**2 * (1.0 - e_sq) / margin**2
    detected_rate = pair_rate_hz * transmittance(pair_loss_db)
    if detected_rate <= 0:
        raise AnalysisError("detected pair rate is zero; no violation in finite time")
    return 4.0 * n_per_setting / detected_rate


def bootstrap_sigma(
    counts: SettingCounts, n_boot: int = 200, rng: np.random.Generator | None = None
) -> float:
    """Bootstrap standard deviation of S.

    Resamples each setting pair's outcome quad multinomially at its
    observed total, recomputing S per replica.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if n_boot < 2:
        raise AnalysisError("need at least 2 bootstrap replicas")
    s_values = np.zeros(n_boot)
    for pair in SETTING_PAIRS:
        quad = np.asarray(counts.outcome_quad(pair), dtype=np.float64)
        n = int(quad.sum())
        if n == 0:
            raise UndefinedCorrelationError("no counts for this setting pair")
        draws = rng.multinomial(n, quad / n, size=n_boot).astype(np.float64)
        e = (draws[:, 0] + draws[:, 3] - draws[:, 1] - draws[:, 2]) / n
        s_values += CHSH_SIGNS[pair] * e
    return float(np.std(s_values, ddof=1))
