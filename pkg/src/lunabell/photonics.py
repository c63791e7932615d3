"""Entangled-pair source and detection-chain models producing time tags.

The source emits polarization-correlated pairs as a homogeneous Poisson
process. Each arm applies a dB attenuation, a polarization analyzer whose
angle follows a per-observer setting timeline, a two-port splitter
(outcome sign +/-), Gaussian timing jitter, and optional dark counts.

Joint outcomes follow the standard two-photon correlation law

    P(s_a, s_b) = 1/4 * (1 + s_a*s_b*sign*V*cos(2*(theta_a - theta_b)))

with visibility V scaling the contrast. Timing jitter per detection is
Gaussian with sigma = FWHM / 2.3548; the shared two-channel converter
resolution enters each channel at fwhm/sqrt(2) so that pair time
differences compose in quadrature with both detector widths.

Two generation modes exist: "raw" thins every emitted pair photon by its
arm transmittance (faithful, but generates every emission), and "thinned"
pre-samples only the surviving both-detected pairs and one-sided singles
at their reduced rates, which is what makes simulating a 1 GHz source
behind >100 dB tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linkbudget import transmittance
from .tagstream import (
    CHANNEL_ALICE_MINUS,
    CHANNEL_ALICE_PLUS,
    CHANNEL_BOB_MINUS,
    CHANNEL_BOB_PLUS,
    TagStream,
)

PS_PER_S = 1_000_000_000_000

# Gaussian FWHM = 2*sqrt(2*ln 2) * sigma ~= 2.3548 * sigma
GAUSSIAN_FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class PhotonicsError(ValueError):
    """Invalid source, detector, or timeline configuration."""


class SingularRateError(PhotonicsError):
    """Degenerate phase matching: equal group indices give no finite rate."""


@dataclass(frozen=True)
class PhaseMatchingSpec:
    """Effective nonlinearity and group indices of a down-conversion process.

    chi_eff is in arbitrary but consistent units across compared specs.
    """

    chi_eff: float
    n_group_signal: float
    n_group_idler: float

    def __post_init__(self) -> None:
        if not (self.chi_eff > 0 and math.isfinite(self.chi_eff)):
            raise PhotonicsError("chi_eff must be > 0")
        if not (math.isfinite(self.n_group_signal) and math.isfinite(self.n_group_idler)):
            raise PhotonicsError("group indices must be finite")

    @property
    def rate_scale(self) -> float:
        """Unnormalized generation-rate proportionality chi^2 / |dn_group|."""
        dn = abs(self.n_group_signal - self.n_group_idler)
        if dn == 0.0:
            raise SingularRateError("equal signal/idler group indices give a singular rate")
        return self.chi_eff**2 / dn


def relative_pair_rate(a: PhaseMatchingSpec, b: PhaseMatchingSpec) -> float:
    """Generation-rate ratio of process a over process b.

    Scales quadratically with the nonlinear coefficient and inversely with
    the signal/idler group-index walk-off.
    """
    return a.rate_scale / b.rate_scale


@dataclass(frozen=True)
class SourceSpec:
    """Pair source: emission rate, correlation visibility and state sign."""

    pair_rate_hz: float = 1.0e9
    visibility: float = 0.806
    state_sign: int = 1

    def __post_init__(self) -> None:
        if self.pair_rate_hz < 0 or not math.isfinite(self.pair_rate_hz):
            raise PhotonicsError("pair_rate must be >= 0")
        if not 0.0 <= self.visibility <= 1.0:
            raise PhotonicsError("visibility must be in [0, 1]")
        if self.state_sign not in (+1, -1):
            raise PhotonicsError("state_sign must be +1 or -1")


@dataclass(frozen=True)
class AnalyzerSettings:
    """Two selectable analyzer angles per observer, degrees in [0, 180).

    Defaults are the inequality-optimal settings realized by a switchable
    half-wave element at 22.5 deg (a 45 deg polarization rotation) with a
    fixed 11.25 deg half-wave plate offsetting one arm by 22.5 deg.
    """

    alice_angles_deg: tuple[float, float] = (0.0, 45.0)
    bob_angles_deg: tuple[float, float] = (22.5, 67.5)

    def __post_init__(self) -> None:
        for angle in (*self.alice_angles_deg, *self.bob_angles_deg):
            if not (0.0 <= angle < 180.0):
                raise PhotonicsError(f"analyzer angle {angle} out of [0, 180)")


@dataclass(frozen=True)
class DetectorSpec:
    """Detector efficiency, timing jitter and dark counts.

    tdc_fwhm_ps is the two-channel coincidence resolution of the shared
    time-to-digital converter; its per-channel share is fwhm/sqrt(2).
    """

    efficiency: float = 1.0
    jitter_fwhm_ps: float = 40.0
    dark_rate_hz: float = 0.0
    tdc_fwhm_ps: float = 60.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise PhotonicsError("efficiency must be in [0, 1]")
        if self.jitter_fwhm_ps < 0 or self.tdc_fwhm_ps < 0:
            raise PhotonicsError("FWHM values must be >= 0")
        if self.dark_rate_hz < 0:
            raise PhotonicsError("dark rate must be >= 0")

    @property
    def sigma_ps(self) -> float:
        """Per-detection Gaussian jitter sigma, detector and TDC in quadrature."""
        s_det = self.jitter_fwhm_ps / GAUSSIAN_FWHM_TO_SIGMA
        s_tdc = self.tdc_fwhm_ps / GAUSSIAN_FWHM_TO_SIGMA / math.sqrt(2.0)
        return math.hypot(s_det, s_tdc)


def system_timing_fwhm(components_ps: list[float] | tuple[float, ...]) -> float:
    """Quadrature-sum FWHM of independent Gaussian timing contributions."""
    if any(c < 0 for c in components_ps):
        raise PhotonicsError("FWHM components must be >= 0")
    return math.sqrt(sum(c * c for c in components_ps))


def correlation_value(theta_a_deg: float, theta_b_deg: float, source: SourceSpec) -> float:
    """Model correlation E = sign * V * cos(2*(theta_a - theta_b))."""
    return source.state_sign * source.visibility * math.cos(
        2.0 * math.radians(theta_a_deg - theta_b_deg)
    )


def joint_outcome_probabilities(
    theta_a_deg: float, theta_b_deg: float, source: SourceSpec
) -> np.ndarray:
    """2x2 outcome table indexed [alice, bob] with 0 -> +1 and 1 -> -1.

    Rows and columns marginalize to 1/2 each regardless of angles.
    """
    corr = correlation_value(theta_a_deg, theta_b_deg, source)
    table = np.empty((2, 2))
    for i, s_a in enumerate((1, -1)):
        for j, s_b in enumerate((1, -1)):
            table[i, j] = 0.25 * (1.0 + s_a * s_b * corr)
    return table


def _strictly_increasing(times: np.ndarray) -> np.ndarray:
    """Bump duplicate ps timestamps so the sequence is strictly increasing."""
    if times.size < 2:
        return times
    t = times.astype(np.int64)
    idx = np.arange(t.size, dtype=np.int64)
    return (np.maximum.accumulate(t - idx) + idx).astype(np.uint64)


def sample_pair_emissions(
    source: SourceSpec, duration_s: float, rng: np.random.Generator
) -> np.ndarray:
    """Emission times of a homogeneous Poisson pair process, in ps.

    Strictly increasing uint64 timestamps; identical generator state gives
    identical streams.
    """
    if duration_s < 0:
        raise PhotonicsError("duration must be >= 0")
    return _sample_poisson_times(source.pair_rate_hz, duration_s, rng)


def _sample_poisson_times(rate_hz: float, duration_s: float, rng: np.random.Generator) -> np.ndarray:
    duration_ps = int(round(duration_s * PS_PER_S))
    if rate_hz <= 0 or duration_ps <= 0:
        return np.empty(0, dtype=np.uint64)
    n = int(rng.poisson(rate_hz * duration_s))
    if n == 0:
        return np.empty(0, dtype=np.uint64)
    times = np.sort(rng.integers(0, duration_ps, size=n, dtype=np.int64))
    return _strictly_increasing(times.astype(np.uint64))


@dataclass
class SettingTimeline:
    """Step function mapping time to the prepared setting index (0 or 1).

    times_ps[k] is when indices[k] became active; coverage starts at
    times_ps[0] and extends indefinitely.
    """

    times_ps: np.ndarray
    indices: np.ndarray

    def __post_init__(self) -> None:
        self.times_ps = np.ascontiguousarray(self.times_ps, dtype=np.uint64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.uint8)
        if self.times_ps.size == 0:
            raise PhotonicsError("setting timeline must have at least one entry")
        if self.times_ps.size != self.indices.size:
            raise PhotonicsError("timeline arrays must have equal length")
        if np.any(np.diff(self.times_ps.astype(np.int64)) < 0):
            raise PhotonicsError("timeline times must be non-decreasing")
        if np.any(self.indices > 1):
            raise PhotonicsError("setting indices must be 0 or 1")

    @staticmethod
    def constant(index: int, start_ps: int = 0) -> "SettingTimeline":
        return SettingTimeline(np.array([start_ps], dtype=np.uint64), np.array([index], dtype=np.uint8))

    def setting_at(self, times_ps: np.ndarray) -> np.ndarray:
        """Active setting index for each query time.

        Raises when a query precedes coverage (no active setting yet).
        """
        times_ps = np.asarray(times_ps, dtype=np.uint64)
        pos = np.searchsorted(self.times_ps, times_ps, side="right")
        if np.any(pos == 0):
            first = int(np.flatnonzero(pos == 0)[0])
            raise PhotonicsError(
                f"emission at {int(times_ps[first])} ps has no active setting "
                f"(coverage starts at {int(self.times_ps[0])} ps)"
            )
        return self.indices[pos - 1]


def _sample_joint_signs(
    corr: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample (s_a, s_b) in {-1, +1} per emission from the correlation law.

    Alice's sign is a fair coin (uniform marginals); Bob equals it with
    probability (1 + corr)/2.
    """
    n = corr.size
    s_a = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    same = rng.random(n) < (1.0 + corr) / 2.0
    s_b = np.where(same, s_a, -s_a).astype(np.int8)
    return s_a, s_b


def _sample_fair_signs(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)


def _jittered_times(
    emission_ps: np.ndarray, delay_ps: int, sigma_ps: float, rng: np.random.Generator
) -> np.ndarray:
    t = emission_ps.astype(np.int64) + int(delay_ps)
    if sigma_ps > 0 and t.size:
        t = t + np.rint(rng.normal(0.0, sigma_ps, size=t.size)).astype(np.int64)
    return np.clip(t, 0, None).astype(np.uint64)


def _dark_tags(
    channel: int, rate_hz: float, duration_s: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    times = _sample_poisson_times(rate_hz, duration_s, rng)
    return times, np.full(times.size, channel, dtype=np.uint8)


@dataclass
class DetectionScenario:
    """Everything the detection chain needs besides the emissions."""

    source: SourceSpec
    angles: AnalyzerSettings
    alice_timeline: SettingTimeline
    bob_timeline: SettingTimeline
    arm_loss_db: tuple[float, float] = (0.0, 0.0)
    detectors: tuple[DetectorSpec, DetectorSpec] = (DetectorSpec(), DetectorSpec())
    arrival_delay_ps: tuple[int, int] = (0, 0)

    def survival_probabilities(self) -> tuple[float, float]:
        p_a = transmittance(self.arm_loss_db[0]) * self.detectors[0].efficiency
        p_b = transmittance(self.arm_loss_db[1]) * self.detectors[1].efficiency
        return p_a, p_b


def _outcome_channels(signs: np.ndarray, plus_channel: int, minus_channel: int) -> np.ndarray:
    return np.where(signs > 0, plus_channel, minus_channel).astype(np.uint8)


def _pair_outcome_signs(
    scenario: DetectionScenario,
    a_arrival_ps: np.ndarray,
    b_arrival_ps: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    ia = scenario.alice_timeline.setting_at(a_arrival_ps)
    ib = scenario.bob_timeline.setting_at(b_arrival_ps)
    theta_a = np.asarray(scenario.angles.alice_angles_deg)[ia]
    theta_b = np.asarray(scenario.angles.bob_angles_deg)[ib]
    corr = (
        scenario.source.state_sign
        * scenario.source.visibility
        * np.cos(2.0 * np.radians(theta_a - theta_b))
    )
    return _sample_joint_signs(corr, rng)


def detect_stream(
    scenario: DetectionScenario,
    duration_s: float,
    seed: int | np.random.SeedSequence,
    mode: str = "thinned",
    emissions_ps: np.ndarray | None = None,
    include_singles: bool = True,
) -> tuple[TagStream, TagStream]:
    """Simulate the detection chain into one tag stream per observer.

    Raw mode draws survival per emitted photon; thinned mode samples the
    surviving categories (both-detected pairs, one-sided singles) directly
    at rates R*pa*pb, R*pa*(1-pb) and R*(1-pa)*pb. Singles generation can
    be switched off where only coincidences matter; dark counts follow the
    per-channel detector rates either way.

    Random substreams are spawned in a fixed documented order (emissions,
    survival/categories, outcomes, alice jitter, bob jitter, darks), so
    identical seeds give bit-identical streams.
    """
    if mode not in ("raw", "thinned"):
        raise PhotonicsError(f"unknown mode {mode!r}")
    if duration_s < 0:
        raise PhotonicsError("duration must be >= 0")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ss_emit, ss_cat, ss_out, ss_jit_a, ss_jit_b, ss_dark = (
        np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(6)
    )
    p_a, p_b = scenario.survival_probabilities()
    delay_a, delay_b = scenario.arrival_delay_ps

    if mode == "raw":
        if emissions_ps is None:
            emissions_ps = sample_pair_emissions(scenario.source, duration_s, ss_emit)
        else:
            emissions_ps = np.ascontiguousarray(emissions_ps, dtype=np.uint64)
        n = emissions_ps.size
        hit_a = ss_cat.random(n) < p_a
        hit_b = ss_cat.random(n) < p_b
        both = emissions_ps[hit_a & hit_b]
        only_a = emissions_ps[hit_a & ~hit_b]
        only_b = emissions_ps[~hit_a & hit_b]
    else:
        rate = scenario.source.pair_rate_hz
        both = _sample_poisson_times(rate * p_a * p_b, duration_s, ss_cat)
        only_a = _sample_poisson_times(rate * p_a * (1.0 - p_b), duration_s, ss_cat)
        only_b = _sample_poisson_times(rate * (1.0 - p_a) * p_b, duration_s, ss_cat)

    if not include_singles:
        only_a = only_a[:0]
        only_b = only_b[:0]

    both_arrival_a = both + np.uint64(delay_a)
    both_arrival_b = both + np.uint64(delay_b)
    s_a, s_b = _pair_outcome_signs(scenario, both_arrival_a, both_arrival_b, ss_out)
    lone_a_signs = _sample_fair_signs(only_a.size, ss_out)
    lone_b_signs = _sample_fair_signs(only_b.size, ss_out)

    det_a, det_b = scenario.detectors
    a_photon_times = np.concatenate([both, only_a])
    a_signs = np.concatenate([s_a, lone_a_signs])
    b_photon_times = np.concatenate([both, only_b])
    b_signs = np.concatenate([s_b, lone_b_signs])

    a_times = _jittered_times(a_photon_times, delay_a, det_a.sigma_ps, ss_jit_a)
    b_times = _jittered_times(b_photon_times, delay_b, det_b.sigma_ps, ss_jit_b)
    a_channels = _outcome_channels(a_signs, CHANNEL_ALICE_PLUS, CHANNEL_ALICE_MINUS)
    b_channels = _outcome_channels(b_signs, CHANNEL_BOB_PLUS, CHANNEL_BOB_MINUS)

    dark_span_s = duration_s + max(delay_a, delay_b) / PS_PER_S
    dark_parts_a = [
        _dark_tags(CHANNEL_ALICE_PLUS, det_a.dark_rate_hz, dark_span_s, ss_dark),
        _dark_tags(CHANNEL_ALICE_MINUS, det_a.dark_rate_hz, dark_span_s, ss_dark),
    ]
    dark_parts_b = [
        _dark_tags(CHANNEL_BOB_PLUS, det_b.dark_rate_hz, dark_span_s, ss_dark),
        _dark_tags(CHANNEL_BOB_MINUS, det_b.dark_rate_hz, dark_span_s, ss_dark),
    ]

    alice = _assemble_stream(a_times, a_channels, dark_parts_a)
    bob = _assemble_stream(b_times, b_channels, dark_parts_b)
    return alice, bob


def _assemble_stream(
    times: np.ndarray,
    channels: np.ndarray,
    dark_parts: list[tuple[np.ndarray, np.ndarray]],
) -> TagStream:
    all_times = np.concatenate([times] + [t for t, _ in dark_parts])
    all_channels = np.concatenate([channels] + [c for _, c in dark_parts])
    order = np.argsort(all_times, kind="stable")
    return TagStream(all_times[order], all_channels[order])
