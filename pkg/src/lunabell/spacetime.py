"""Earth-Moon-source geometry, interval classification and validity windows.

A photon source parked at a triangular libration point sits one side length
away from both Earth and Moon. Measurement settings chosen by slow (human)
agents stay causally disconnected from the remote measurement and from the
pair emission only if each detected photon arrives soon enough after the
local setting was prepared. This module computes those admissibility
windows and classifies space-time intervals between labelled events.

All positions are in kilometers, times in seconds. Functions are pure and
safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

LIGHT_SPEED_KM_S = 299792.458
EARTH_MOON_SIDE_KM = 3.8e5

# One-way light time across the triangle side, rounded as used in the
# validity-window bookkeeping (3.8e5 km / c = 1.2675 s).
ROUNDED_LIGHT_TIME_S = 1.28

DEFAULT_INTERVAL_TOL_S = 1e-6

LOOPHOLES = ("locality", "freedom-of-choice", "combined")


class SpacetimeError(ValueError):
    """Invalid geometry, timing, or event input."""


@dataclass(frozen=True)
class SpacetimeEvent:
    """A labelled (position, time) point.

    position is a 3-vector in km; time is seconds from the scenario epoch.
    """

    label: str
    position: tuple[float, float, float]
    time: float

    def __post_init__(self) -> None:
        if len(self.position) != 3 or not all(math.isfinite(x) for x in self.position):
            raise SpacetimeError(f"event {self.label!r}: position must be a finite 3-vector")
        if not math.isfinite(self.time):
            raise SpacetimeError(f"event {self.label!r}: time must be finite")


@dataclass(frozen=True)
class GeometryConfig:
    """Equilateral source-Earth-Moon triangle.

    use_paper_rounding selects the rounded 1.28 s one-way light time for
    window arithmetic instead of side_length / light_speed; the rounded
    figure is the default because the headline 0.78 s / 2.06 s validity
    windows are defined against it.
    """

    side_length_km: float = EARTH_MOON_SIDE_KM
    light_speed_km_s: float = LIGHT_SPEED_KM_S
    use_paper_rounding: bool = True

    def __post_init__(self) -> None:
        if not (self.side_length_km > 0 and math.isfinite(self.side_length_km)):
            raise SpacetimeError("side_length_km must be positive and finite")
        if not (self.light_speed_km_s > 0 and math.isfinite(self.light_speed_km_s)):
            raise SpacetimeError("light_speed_km_s must be positive and finite")

    @property
    def exact_light_time_s(self) -> float:
        return self.side_length_km / self.light_speed_km_s

    @property
    def one_way_light_time_s(self) -> float:
        """Light time used for window arithmetic (rounded or exact)."""
        if self.use_paper_rounding:
            return ROUNDED_LIGHT_TIME_S
        return self.exact_light_time_s


@dataclass(frozen=True)
class TimingBudget:
    """Delay between a setting choice and the setting being ready.

    reaction_time covers the agent's keypress latency, system_delay the
    electronics between keypress and the analyzer reaching its state.
    delta_t is the total choice-to-ready delay budgeted per trial.
    """

    reaction_time_s: float = 0.45
    system_delay_s: float = 0.05
    delta_t_s: float = 0.5

    def __post_init__(self) -> None:
        if min(self.reaction_time_s, self.system_delay_s, self.delta_t_s) < 0:
            raise SpacetimeError("timing budget components must be >= 0")
        if self.delta_t_s < self.system_delay_s:
            raise SpacetimeError("delta_t must be >= system_delay")


@dataclass(frozen=True)
class LoopholeWindow:
    """Maximum prepared-to-detection delay for a photon to count as valid."""

    loophole: str
    window_s: float

    def __post_init__(self) -> None:
        if self.loophole not in LOOPHOLES:
            raise SpacetimeError(f"unknown loophole {self.loophole!r}")
        if self.window_s < 0:
            raise SpacetimeError("window must be clamped at 0")


def lagrange_positions(config: GeometryConfig) -> tuple[SpacetimeEvent, SpacetimeEvent, SpacetimeEvent]:
    """Place earth, moon and the source on an equilateral triangle at t=0.

    The source sits at the origin with Earth and Moon in the xy-plane;
    only pairwise distances matter downstream. Relabelling the two
    triangular libration points mirrors the triangle without changing
    any distance.
    """
    d = config.side_length_km
    earth = SpacetimeEvent("earth", (d, 0.0, 0.0), 0.0)
    moon = SpacetimeEvent("moon", (d / 2.0, d * math.sqrt(3.0) / 2.0, 0.0), 0.0)
    source = SpacetimeEvent("source", (0.0, 0.0, 0.0), 0.0)
    return earth, moon, source


def separation_km(e1: SpacetimeEvent, e2: SpacetimeEvent) -> float:
    return math.dist(e1.position, e2.position)


def classify_interval(
    e1: SpacetimeEvent,
    e2: SpacetimeEvent,
    light_speed_km_s: float = LIGHT_SPEED_KM_S,
    tol_s: float = DEFAULT_INTERVAL_TOL_S,
) -> str:
    """Classify the interval between two events.

    Returns "space-like" when |dx| > c|dt| + c*tol, "time-like" when
    |dx| < c|dt| - c*tol and "light-like" otherwise. The tolerance band
    absorbs floating-point noise at planetary scales (default 1 us).
    Symmetric in its event arguments.
    """
    if tol_s < 0:
        raise SpacetimeError("tolerance must be >= 0")
    dx = separation_km(e1, e2)
    cdt = light_speed_km_s * abs(e1.time - e2.time)
    slack = light_speed_km_s * tol_s
    if dx > cdt + slack:
        return "space-like"
    if dx < cdt - slack:
        return "time-like"
    return "light-like"


def admissible_window(
    loophole: str,
    timing: TimingBudget,
    config: GeometryConfig,
) -> LoopholeWindow:
    """Maximum prepared-to-detection delay keeping the given loophole closed.

    Closing locality requires the remote measurement to stay outside the
    local choice's light cone: photons must arrive within one light time
    of the choice, i.e. within light_time - delta_t of the setting being
    ready. Setting independence from the emission allows twice the light
    time, i.e. 2*light_time - delta_t. Both clamp at zero, and "combined"
    is the minimum of the two.
    """
    t1 = config.one_way_light_time_s
    if loophole == "locality":
        window = max(0.0, t1 - timing.delta_t_s)
    elif loophole == "freedom-of-choice":
        window = max(0.0, 2.0 * t1 - timing.delta_t_s)
    elif loophole == "combined":
        window = min(
            admissible_window("locality", timing, config).window_s,
            admissible_window("freedom-of-choice", timing, config).window_s,
        )
    else:
        raise SpacetimeError(f"unknown loophole {loophole!r}")
    return LoopholeWindow(loophole, window)


@dataclass(frozen=True)
class TrialValidity:
    locality_ok: bool
    foc_ok: bool


def validate_trial(
    prepared_time_s: float,
    detection_time_s: float,
    timing: TimingBudget,
    config: GeometryConfig,
) -> TrialValidity:
    """Flag whether a detection keeps each loophole closed.

    A flag is true iff detection - prepared does not exceed the
    corresponding admissible window. Detection before preparation is
    rejected.
    """
    if detection_time_s < prepared_time_s:
        raise SpacetimeError(
            f"detection at {detection_time_s} s precedes preparation at {prepared_time_s} s"
        )
    elapsed = detection_time_s - prepared_time_s
    locality = admissible_window("locality", timing, config).window_s
    foc = admissible_window("freedom-of-choice", timing, config).window_s
    return TrialValidity(locality_ok=elapsed <= locality, foc_ok=elapsed <= foc)


def window_report(timing: TimingBudget, config: GeometryConfig) -> dict[str, float]:
    """Key/value summary used by the CLI and the service."""
    earth, moon, source = lagrange_positions(config)
    return {
        "side_length_km": config.side_length_km,
        "light_speed_km_s": config.light_speed_km_s,
        "exact_light_time_s": config.exact_light_time_s,
        "one_way_light_time_s": config.one_way_light_time_s,
        "earth_moon_km": separation_km(earth, moon),
        "delta_t_s": timing.delta_t_s,
        "locality_window_s": admissible_window("locality", timing, config).window_s,
        "freedom_of_choice_window_s": admissible_window("freedom-of-choice", timing, config).window_s,
        "combined_window_s": admissible_window("combined", timing, config).window_s,
    }
