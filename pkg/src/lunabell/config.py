"""Scenario configuration: presets, file parsing, canonical hashing.

Configuration is a flat set of dotted keys grouped by section (run.*,
source.*, detectors.*, losses.*, angles.*, spacetime.*). Files use INI
sections with key=value lines; the same dotted keys work as CLI
overrides. The canonical JSON form (sorted keys, exact float repr) is
hashed so runs can be tied to the exact configuration that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .linkbudget import PRESETS as BUDGET_PRESETS
from .photonics import AnalyzerSettings, DetectorSpec, SourceSpec
from .spacetime import GeometryConfig, TimingBudget

SCHEMA_VERSION = 1

MODES = ("headless", "interactive", "replay")
CHOICE_SOURCES = ("rng", "replay", "live")
SAMPLING_MODES = ("thinned", "raw")


class ConfigError(ValueError):
    """Invalid or inconsistent session configuration."""


@dataclass(frozen=True)
class SessionConfig:
    """Complete description of one run.

    Defaults reproduce the tabletop 103 dB scenario: 1 GHz pairs,
    visibility 0.806, 51.5 dB per photon, 40 ps detectors with a 60 ps
    shared converter, choices at 2-4 Hz with a 50 ms preparation delay.
    """

    preset: str = "paper_lab_103db"
    mode: str = "headless"
    seed: int = 0
    duration_s: float = 10800.0
    time_compression: float = 1.0
    choice_source: str = "rng"
    choice_rate_min_hz: float = 2.0
    choice_rate_max_hz: float = 4.0
    system_delay_s: float = 0.05
    pair_rate_hz: float = 1.0e9
    visibility: float = 0.806
    state_sign: int = 1
    alice_angles_deg: tuple[float, float] = (0.0, 45.0)
    bob_angles_deg: tuple[float, float] = (22.5, 67.5)
    arm_loss_db: tuple[float, float] = (51.5, 51.5)
    detector_efficiency: tuple[float, float] = (1.0, 1.0)
    jitter_fwhm_ps: tuple[float, float] = (40.0, 40.0)
    tdc_fwhm_ps: float = 60.0
    dark_rate_hz: tuple[float, float] = (0.0, 0.0)
    coincidence_window_ps: int = 500
    include_singles: bool = False
    sampling_mode: str = "thinned"
    geometry_enabled: bool = False
    side_length_km: float = 3.8e5
    use_paper_rounding: bool = True
    delta_t_s: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.choice_source not in CHOICE_SOURCES:
            raise ConfigError(f"choice_source must be one of {CHOICE_SOURCES}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigError(f"sampling_mode must be one of {SAMPLING_MODES}")
        if self.mode == "interactive" and self.time_compression != 1.0:
            raise ConfigError("interactive mode forbids time_compression != 1")
        if self.time_compression < 1.0:
            raise ConfigError("time_compression must be >= 1")
        if self.duration_s < 0:
            raise ConfigError("duration must be >= 0")
        if not (0 < self.choice_rate_min_hz <= self.choice_rate_max_hz):
            raise ConfigError("choice rates must satisfy 0 < min <= max")
        if self.system_delay_s < 0:
            raise ConfigError("system delay must be >= 0")
        if min(self.arm_loss_db) < 0:
            raise ConfigError("arm losses must be >= 0 dB")
        if self.coincidence_window_ps <= 0:
            raise ConfigError("coincidence window must be > 0")
        # constructing the component specs validates their own ranges
        self.source_spec()
        self.detector_specs()
        self.analyzer_settings()
        self.timing_budget()

    # --- typed views consumed by the physics modules ---

    def source_spec(self) -> SourceSpec:
        return SourceSpec(
            pair_rate_hz=self.pair_rate_hz,
            visibility=self.visibility,
            state_sign=self.state_sign,
        )

    def detector_specs(self) -> tuple[DetectorSpec, DetectorSpec]:
        return tuple(
            DetectorSpec(
                efficiency=self.detector_efficiency[i],
                jitter_fwhm_ps=self.jitter_fwhm_ps[i],
                dark_rate_hz=self.dark_rate_hz[i],
                tdc_fwhm_ps=self.tdc_fwhm_ps,
            )
            for i in range(2)
        )

    def analyzer_settings(self) -> AnalyzerSettings:
        return AnalyzerSettings(
            alice_angles_deg=tuple(self.alice_angles_deg),
            bob_angles_deg=tuple(self.bob_angles_deg),
        )

    def geometry_config(self) -> GeometryConfig | None:
        if not self.geometry_enabled:
            return None
        return GeometryConfig(
            side_length_km=self.side_length_km,
            use_paper_rounding=self.use_paper_rounding,
        )

    def timing_budget(self) -> TimingBudget:
        reaction = max(0.0, self.delta_t_s - self.system_delay_s)
        return TimingBudget(
            reaction_time_s=reaction,
            system_delay_s=self.system_delay_s,
            delta_t_s=self.delta_t_s,
        )

    @property
    def pair_loss_db(self) -> float:
        return sum(self.arm_loss_db)

    # --- flat key/value form, file parsing and hashing ---

    def to_flat(self) -> dict[str, object]:
        return {
            "run.preset": self.preset,
            "run.mode": self.mode,
            "run.seed": self.seed,
            "run.duration_s": self.duration_s,
            "run.time_compression": self.time_compression,
            "run.choice_source": self.choice_source,
            "run.choice_rate_min_hz": self.choice_rate_min_hz,
            "run.choice_rate_max_hz": self.choice_rate_max_hz,
            "run.system_delay_s": self.system_delay_s,
            "run.coincidence_window_ps": self.coincidence_window_ps,
            "run.include_singles": self.include_singles,
            "run.sampling_mode": self.sampling_mode,
            "source.pair_rate_hz": self.pair_rate_hz,
            "source.visibility": self.visibility,
            "source.state_sign": self.state_sign,
            "angles.alice_0_deg": self.alice_angles_deg[0],
            "angles.alice_1_deg": self.alice_angles_deg[1],
            "angles.bob_0_deg": self.bob_angles_deg[0],
            "angles.bob_1_deg": self.bob_angles_deg[1],
            "losses.arm_a_db": self.arm_loss_db[0],
            "losses.arm_b_db": self.arm_loss_db[1],
            "detectors.efficiency_a": self.detector_efficiency[0],
            "detectors.efficiency_b": self.detector_efficiency[1],
            "detectors.jitter_fwhm_ps_a": self.jitter_fwhm_ps[0],
            "detectors.jitter_fwhm_ps_b": self.jitter_fwhm_ps[1],
            "detectors.tdc_fwhm_ps": self.tdc_fwhm_ps,
            "detectors.dark_rate_hz_a": self.dark_rate_hz[0],
            "detectors.dark_rate_hz_b": self.dark_rate_hz[1],
            "spacetime.enabled": self.geometry_enabled,
            "spacetime.side_length_km": self.side_length_km,
            "spacetime.use_paper_rounding": self.use_paper_rounding,
            "spacetime.delta_t_s": self.delta_t_s,
        }

    @staticmethod
    def from_flat(flat: dict[str, object]) -> "SessionConfig":
        known = SessionConfig().to_flat()
        unknown = set(flat) - set(known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        merged = dict(known)
        merged.update(flat)
        f = merged
        return SessionConfig(
            preset=str(f["run.preset"]),
            mode=str(f["run.mode"]),
            seed=_as_int(f["run.seed"], "run.seed"),
            duration_s=_as_float(f["run.duration_s"], "run.duration_s"),
            time_compression=_as_float(f["run.time_compression"], "run.time_compression"),
            choice_source=str(f["run.choice_source"]),
            choice_rate_min_hz=_as_float(f["run.choice_rate_min_hz"], "run.choice_rate_min_hz"),
            choice_rate_max_hz=_as_float(f["run.choice_rate_max_hz"], "run.choice_rate_max_hz"),
            system_delay_s=_as_float(f["run.system_delay_s"], "run.system_delay_s"),
            coincidence_window_ps=_as_int(f["run.coincidence_window_ps"], "run.coincidence_window_ps"),
            include_singles=_as_bool(f["run.include_singles"], "run.include_singles"),
            sampling_mode=str(f["run.sampling_mode"]),
            pair_rate_hz=_as_float(f["source.pair_rate_hz"], "source.pair_rate_hz"),
            visibility=_as_float(f["source.visibility"], "source.visibility"),
            state_sign=_as_int(f["source.state_sign"], "source.state_sign"),
            alice_angles_deg=(
                _as_float(f["angles.alice_0_deg"], "angles.alice_0_deg"),
                _as_float(f["angles.alice_1_deg"], "angles.alice_1_deg"),
            ),
            bob_angles_deg=(
                _as_float(f["angles.bob_0_deg"], "angles.bob_0_deg"),
                _as_float(f["angles.bob_1_deg"], "angles.bob_1_deg"),
            ),
            arm_loss_db=(
                _as_float(f["losses.arm_a_db"], "losses.arm_a_db"),
                _as_float(f["losses.arm_b_db"], "losses.arm_b_db"),
            ),
            detector_efficiency=(
                _as_float(f["detectors.efficiency_a"], "detectors.efficiency_a"),
                _as_float(f["detectors.efficiency_b"], "detectors.efficiency_b"),
            ),
            jitter_fwhm_ps=(
                _as_float(f["detectors.jitter_fwhm_ps_a"], "detectors.jitter_fwhm_ps_a"),
                _as_float(f["detectors.jitter_fwhm_ps_b"], "detectors.jitter_fwhm_ps_b"),
            ),
            tdc_fwhm_ps=_as_float(f["detectors.tdc_fwhm_ps"], "detectors.tdc_fwhm_ps"),
            dark_rate_hz=(
                _as_float(f["detectors.dark_rate_hz_a"], "detectors.dark_rate_hz_a"),
                _as_float(f["detectors.dark_rate_hz_b"], "detectors.dark_rate_hz_b"),
            ),
            geometry_enabled=_as_bool(f["spacetime.enabled"], "spacetime.enabled"),
            side_length_km=_as_float(f["spacetime.side_length_km"], "spacetime.side_length_km"),
            use_paper_rounding=_as_bool(f["spacetime.use_paper_rounding"], "spacetime.use_paper_rounding"),
            delta_t_s=_as_float(f["spacetime.delta_t_s"], "spacetime.delta_t_s"),
        )

    def with_overrides(self, overrides: dict[str, object]) -> "SessionConfig":
        flat = self.to_flat()
        for key, value in overrides.items():
            if key not in flat:
                raise ConfigError(f"unknown configuration key {key!r}")
            flat[key] = value
        return SessionConfig.from_flat(flat)

    def canonical_json(self) -> str:
        return json.dumps(self.to_flat(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _as_float(value: object, key: str) -> float:
    try:
        out = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from e
    if math.isnan(out):
        raise ConfigError(f"{key}: NaN is not allowed")
    return out


def _as_int(value: object, key: str) -> int:
    try:
        out = int(str(value), 0) if isinstance(value, str) else int(value)  # type: ignore[arg-type]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from e
    return out


def _as_bool(value: object, key: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


# Session presets. The tabletop scenario keeps singles generation off: at
# 51.5 dB per photon the singles streams outnumber surviving pairs by ~1e5
# and their accidentals would swamp the loss-dominated coincidence count;
# the report carries the accidental-rate estimate instead. The interactive
# default drops the pair loss to 90 dB so observers see about one
# coincidence per second.
SESSION_PRESETS: dict[str, dict[str, object]] = {
    "paper_lab_103db": {},
    "earth_moon_table1": {
        "run.preset": "earth_moon_table1",
        "losses.arm_a_db": BUDGET_PRESETS["paper_table1"].arms[0].total_db,
        "losses.arm_b_db": BUDGET_PRESETS["paper_table1"].arms[1].total_db,
        "spacetime.enabled": True,
    },
    "interactive_90db": {
        "run.preset": "interactive_90db",
        "losses.arm_a_db": 45.0,
        "losses.arm_b_db": 45.0,
        "spacetime.enabled": True,
        "run.duration_s": 600.0,
    },
}


def preset_config(name: str, **field_overrides: object) -> SessionConfig:
    """Build a SessionConfig from a named preset plus dataclass overrides."""
    if name not in SESSION_PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(SESSION_PRESETS)}")
    config = SessionConfig().with_overrides(SESSION_PRESETS[name])
    if field_overrides:
        config = replace(config, **field_overrides)
    return config


def load_config_file(path: str | Path) -> dict[str, object]:
    """Read an INI-style config file into dotted override keys."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    overrides: dict[str, object] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            overrides[f"{section}.{key}"] = value
    return overrides


def parse_override(text: str) -> tuple[str, str]:
    """Split a key=value CLI override."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()
