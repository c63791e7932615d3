"""Trial records, choice logs, run reports and their persistence.

A run directory holds everything needed to reproduce a run bit-for-bit:

    config.json        configuration snapshot + hash
    choices.log        one line per setting choice (diff-able text)
    tags_alice.bin     binary tag stream, alice channels
    tags_bob.bin       binary tag stream, bob channels
    pairs.bin          matched coincidences
    report.json        machine-readable report
    report.txt         human-readable report

The report hash covers the canonical JSON with volatile fields (wall
time) removed, so an honest replay of the artifacts reproduces it
exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..config import SCHEMA_VERSION, SessionConfig

OBSERVERS = ("alice", "bob")

CHOICE_LOG_HEADER = "# lunabell-choices v1"

REPORT_VOLATILE_KEYS = ("wall_time_s",)


class PersistenceError(ValueError):
    """Corrupt or unreadable run artifacts."""


@dataclass(frozen=True)
class ChoiceEvent:
    """One keypress: observer picked a setting at a session time."""

    t_choice_ps: int
    observer: str
    setting: int

    def __post_init__(self) -> None:
        if self.observer not in OBSERVERS:
            raise PersistenceError(f"observer must be alice or bob, got {self.observer!r}")
        if self.setting not in (0, 1):
            raise PersistenceError(f"setting must be 0 or 1, got {self.setting}")
        if self.t_choice_ps < 0:
            raise PersistenceError("choice time must be >= 0")


@dataclass
class TrialRecord:
    """One choice-to-detection trial for a single observer.

    detection/outcome stay None when no coincidence fell inside the
    trial; validity flags stay None ("pending") in that case or when
    space-time validity is not being evaluated.
    """

    observer: str
    choice_time_s: float
    prepared_time_s: float
    setting_index: int
    detection_time_s: float | None = None
    outcome: int | None = None
    locality_ok: bool | None = None
    foc_ok: bool | None = None

    def __post_init__(self) -> None:
        if self.prepared_time_s < self.choice_time_s:
            raise PersistenceError("prepared_time must be >= choice_time")


def write_choice_log(path: str | Path, config_hash: str, choices: list[ChoiceEvent]) -> None:
    lines = [CHOICE_LOG_HEADER, f"# config_hash: {config_hash}"]
    lines += [f"{c.t_choice_ps} {c.observer} {c.setting}" for c in choices]
    Path(path).write_text("\n".join(lines) + "\n")


def read_choice_log(path: str | Path) -> tuple[str, list[ChoiceEvent]]:
    """Parse a choice log; malformed lines are reported by line number."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise PersistenceError(f"cannot read choice log {path}: {e}") from e
    lines = text.splitlines()
    if not lines or lines[0].strip() != CHOICE_LOG_HEADER:
        raise PersistenceError(f"{path}: line 1: bad or missing header (expected {CHOICE_LOG_HEADER!r})")
    if len(lines) < 2 or not lines[1].startswith("# config_hash: "):
        raise PersistenceError(f"{path}: line 2: missing config_hash header")
    config_hash = lines[1].removeprefix("# config_hash: ").strip()
    choices: list[ChoiceEvent] = []
    last_per_observer = {"alice": -1, "bob": -1}
    for number, line in enumerate(lines[2:], start=3):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PersistenceError(f"{path}: line {number}: expected 't_ps observer setting'")
        try:
            event = ChoiceEvent(int(parts[0]), parts[1], int(parts[2]))
        except (ValueError, PersistenceError) as e:
            raise PersistenceError(f"{path}: line {number}: {e}") from e
        if event.t_choice_ps < last_per_observer[event.observer]:
            raise PersistenceError(f"{path}: line {number}: choices out of order for {event.observer}")
        last_per_observer[event.observer] = event.t_choice_ps
        choices.append(event)
    return config_hash, choices


@dataclass
class ValidityTally:
    """Per-loophole trial tallies; ok + fail + pending = total trials."""

    ok: int = 0
    fail: int = 0
    pending: int = 0

    @property
    def total(self) -> int:
        return self.ok + self.fail + self.pending


@dataclass
class RunReport:
    """Everything a finished run reports, hashable for replay checks."""

    schema_version: int
    mode: str
    seed: int
    preset: str
    config_hash: str
    duration_s: float
    pair_loss_db: float
    geometry_enabled: bool
    n_choices_alice: int
    n_choices_bob: int
    n_trials: int
    n_coincidences: int
    n_counted_coincidences: int
    expected_coincidences: float
    accidental_rate_hz: float
    locality: ValidityTally = field(default_factory=ValidityTally)
    freedom_of_choice: ValidityTally = field(default_factory=ValidityTally)
    pairs_locality_ok: int = 0
    pairs_foc_ok: int = 0
    pairs_fully_valid: int = 0
    counts_table: list | None = None
    s_value: float | None = None
    s_sigma: float | None = None
    correlations: list | None = None
    sign_convention: str = ""
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self, include_volatile: bool = True) -> str:
        data = self.to_dict()
        if not include_volatile:
            for key in REPORT_VOLATILE_KEYS:
                data.pop(key, None)
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def report_hash(self) -> str:
        return hashlib.sha256(self.canonical_json(include_volatile=False).encode()).hexdigest()

    @staticmethod
    def from_dict(data: dict) -> "RunReport":
        data = dict(data)
        data["locality"] = ValidityTally(**data["locality"])
        data["freedom_of_choice"] = ValidityTally(**data["freedom_of_choice"])
        return RunReport(**data)

    def render_text(self) -> str:
        lines = [
            f"run mode={self.mode} preset={self.preset} seed={self.seed}",
            f"duration: {self.duration_s:.1f} s   pair loss: {self.pair_loss_db:.1f} dB",
            f"choices: alice={self.n_choices_alice} bob={self.n_choices_bob}  trials={self.n_trials}",
            f"coincidences: {self.n_coincidences} found, {self.n_counted_coincidences} counted"
            f" (expected {self.expected_coincidences:.1f}, accidental rate {self.accidental_rate_hz:.3g}/s)",
        ]
        if self.geometry_enabled:
            lines.append(
                "validity: locality ok/fail/pending = "
                f"{self.locality.ok}/{self.locality.fail}/{self.locality.pending}, "
                "freedom-of-choice = "
                f"{self.freedom_of_choice.ok}/{self.freedom_of_choice.fail}/{self.freedom_of_choice.pending}"
            )
            lines.append(
                f"pairs: locality_ok={self.pairs_locality_ok} foc_ok={self.pairs_foc_ok}"
                f" fully_valid={self.pairs_fully_valid}"
            )
        if self.s_value is not None:
            lines.append(f"S = {self.s_value:.4f} +/- {self.s_sigma:.4f}   ({self.sign_convention})")
            if self.correlations:
                for corr in self.correlations:
                    lines.append(
                        f"  E(a{corr['alice_setting']}, b{corr['bob_setting']}) ="
                        f" {corr['value']:+.4f} +/- {corr['sigma']:.4f}  (n={corr['n']})"
                    )
        else:
            lines.append("S undefined: at least one setting pair has no counts")
        lines.append(f"report hash: {self.report_hash()}")
        return "\n".join(lines)

    def key_values(self) -> dict[str, object]:
        """Flat machine-readable key=value view."""
        out: dict[str, object] = {
            "mode": self.mode,
            "seed": self.seed,
            "preset": self.preset,
            "config_hash": self.config_hash,
            "duration_s": self.duration_s,
            "pair_loss_db": self.pair_loss_db,
            "n_choices_alice": self.n_choices_alice,
            "n_choices_bob": self.n_choices_bob,
            "n_trials": self.n_trials,
            "n_coincidences": self.n_coincidences,
            "n_counted_coincidences": self.n_counted_coincidences,
            "expected_coincidences": self.expected_coincidences,
            "accidental_rate_hz": self.accidental_rate_hz,
            "locality_ok": self.locality.ok,
            "locality_fail": self.locality.fail,
            "locality_pending": self.locality.pending,
            "foc_ok": self.freedom_of_choice.ok,
            "foc_fail": self.freedom_of_choice.fail,
            "foc_pending": self.freedom_of_choice.pending,
            "pairs_fully_valid": self.pairs_fully_valid,
            "s_value": self.s_value,
            "s_sigma": self.s_sigma,
            "report_hash": self.report_hash(),
        }
        return out


def write_report(path: str | Path, report: RunReport) -> None:
    Path(path).write_text(report.canonical_json(include_volatile=True) + "\n")


def read_report(path: str | Path) -> RunReport:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise PersistenceError(f"cannot read report {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise PersistenceError(f"{path}: invalid JSON: {e}") from e
    return RunReport.from_dict(data)


def write_config_snapshot(path: str | Path, config: SessionConfig) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config.config_hash(),
        "config": config.to_flat(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_config_snapshot(path: str | Path) -> SessionConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as e:
        raise PersistenceError(f"cannot read config snapshot {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise PersistenceError(f"{path}: invalid JSON: {e}") from e
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise PersistenceError(
            f"{path}: schema version mismatch (file has {version}, expected {SCHEMA_VERSION})"
        )
    config = SessionConfig.from_flat(payload["config"])
    stored = payload.get("config_hash")
    if stored != config.config_hash():
        raise PersistenceError(f"{path}: config hash mismatch (snapshot edited?)")
    return config
