"""Live two-observer sessions over the deterministic engine.

A live session wraps a SessionEngine with wall-clock bookkeeping: the
session clock starts when both observer roles are claimed, pauses while a
feed is disconnected, and resumes on reconnect. All mutation happens
through this class from a single thread or event loop (one writer);
snapshots handed to subscribers are plain dicts.

An injectable clock makes sessions fully deterministic under test: a
scripted choice feed against a manual clock reproduces a headless run
with the same schedule bit for bit.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from ..config import SessionConfig
from ..photonics import PS_PER_S
from .engine import SessionEngine
from .headless import persist_run
from .records import RunReport

ROLES = ("alice", "bob")

STATE_WAITING = "waiting"
STATE_RUNNING = "running"
STATE_PAUSED = "paused"
STATE_CLOSED = "closed"


class SessionError(ValueError):
    """Protocol violation: bad role, duplicate claim, closed session."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class MonotonicClock:
    def now(self) -> float:
        return time.monotonic()


class ManualClock:
    """Test clock advanced explicitly."""

    def __init__(self, start: float = 0.0):
        self._t = start

    def now(self) -> float:
        return self._t

    def advance(self, dt: float) -> None:
        self._t += dt

    def set(self, t: float) -> None:
        self._t = t


@dataclass
class RoleSlot:
    claimed: bool = False
    connected: bool = False
    n_choices: int = 0


class LiveSession:
    """One interactive session: role claims, choices, streaming stats."""

    def __init__(
        self,
        config: SessionConfig,
        clock=None,
        session_id: str | None = None,
        persist_dir: str | Path | None = None,
    ):
        self.config = config
        self.clock = clock or MonotonicClock()
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.engine = SessionEngine(config)
        self.roles: dict[str, RoleSlot] = {role: RoleSlot() for role in ROLES}
        self.state = STATE_WAITING
        self.seq = 0
        self._accum_s = 0.0
        self._anchor: float | None = None
        self._seen_choice_ids: set[str] = set()
        self._report: RunReport | None = None
        self._started_wall = time.monotonic()

    # --- clock bookkeeping ---

    def session_time_s(self) -> float:
        elapsed = self._accum_s
        if self._anchor is not None:
            elapsed += self.clock.now() - self._anchor
        return min(elapsed, self.config.duration_s)

    def _freeze_clock(self) -> None:
        if self._anchor is not None:
            self._accum_s += self.clock.now() - self._anchor
            self._anchor = None

    def _start_clock(self) -> None:
        if self._anchor is None:
            self._anchor = self.clock.now()

    # --- role lifecycle ---

    def claim(self, role: str) -> None:
        """Claim an observer role; reconnecting to a detached role is allowed."""
        self._ensure_open()
        if role not in ROLES:
            raise SessionError("bad-role", f"unknown role {role!r}; choose alice or bob")
        slot = self.roles[role]
        if slot.claimed and slot.connected:
            raise SessionError("role-conflict", f"role {role!r} is already claimed")
        slot.claimed = True
        slot.connected = True
        self._update_run_state()

    def disconnect(self, role: str) -> None:
        """A feed dropped: session pauses until the role reconnects."""
        if self.state == STATE_CLOSED or role not in ROLES:
            return
        self.roles[role].connected = False
        self._update_run_state()

    def _update_run_state(self) -> None:
        if self.state == STATE_CLOSED:
            return
        armed = all(slot.claimed for slot in self.roles.values())
        live = all(slot.connected for slot in self.roles.values())
        if not armed:
            self.state = STATE_WAITING
            return
        if live:
            self._start_clock()
            self.state = STATE_RUNNING
        else:
            self._freeze_clock()
            self.state = STATE_PAUSED

    # --- event feed ---

    def submit_choice(self, role: str, setting: int, choice_id: str | None = None) -> bool:
        """Apply one setting choice; returns False for a duplicate id.

        Duplicates arise when a client resends buffered choices after a
        reconnect; client-generated ids make the resend idempotent.
        """
        self._ensure_open()
        slot = self.roles.get(role)
        if slot is None or not slot.claimed:
            raise SessionError("bad-role", f"role {role!r} has not been claimed")
        if setting not in (0, 1):
            raise SessionError("bad-setting", f"setting must be 0 or 1, got {setting}")
        if self.state == STATE_WAITING:
            raise SessionError("not-armed", "both roles must be claimed before choices count")
        if choice_id is not None:
            if choice_id in self._seen_choice_ids:
                return False
            self._seen_choice_ids.add(choice_id)
        t_ps = int(round(self.session_time_s() * PS_PER_S))
        self.engine.advance_to(t_ps)
        self.engine.add_choice(role, t_ps, setting)
        slot.n_choices += 1
        return True

    def tick(self) -> dict:
        """Advance simulation to the current session time and snapshot stats."""
        if self.state == STATE_RUNNING:
            t_ps = int(round(self.session_time_s() * PS_PER_S))
            self.engine.advance_to(t_ps)
            if self.session_time_s() >= self.config.duration_s:
                self.close()
        return self.stats_snapshot()

    def stats_snapshot(self) -> dict:
        """Sequence-numbered cumulative statistics for subscribers."""
        engine_stats = self.engine.stats()
        self.seq += 1
        return {
            "type": "stats",
            "seq": self.seq,
            "session_id": self.session_id,
            "state": self.state,
            "session_time_s": self.session_time_s(),
            "roles_claimed": {role: slot.claimed for role, slot in self.roles.items()},
            "roles_connected": {role: slot.connected for role, slot in self.roles.items()},
            "n_choices_alice": engine_stats.n_choices_alice,
            "n_choices_bob": engine_stats.n_choices_bob,
            "n_pairs": engine_stats.n_pairs,
            "n_counted": engine_stats.n_counted,
            "counts_table": engine_stats.counts_table,
            "s_value": engine_stats.s_value,
            "s_sigma": engine_stats.s_sigma,
            "pairs_fully_valid": engine_stats.pairs_fully_valid,
            "locality": engine_stats.locality,
            "freedom_of_choice": engine_stats.freedom_of_choice,
            "current_settings": engine_stats.current_settings,
            "pair_loss_db": self.config.pair_loss_db,
            "geometry_enabled": self.config.geometry_enabled,
        }

    # --- shutdown ---

    def close(self) -> RunReport:
        """Finalize the engine, persist artifacts, return the report."""
        if self._report is not None:
            return self._report
        self._freeze_clock()
        t_ps = int(round(self.session_time_s() * PS_PER_S))
        self.engine.advance_to(t_ps)
        self._report = self.engine.finalize(wall_time_s=time.monotonic() - self._started_wall)
        self.state = STATE_CLOSED
        if self.persist_dir is not None:
            persist_run(self.persist_dir, self.config, self.engine, self._report)
        return self._report

    @property
    def report(self) -> RunReport | None:
        return self._report

    def _ensure_open(self) -> None:
        if self.state == STATE_CLOSED:
            raise SessionError("closed", "session is closed")
