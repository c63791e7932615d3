"""End-to-end session orchestration: headless runs, replay, live sessions."""

from .engine import EngineError, SessionEngine
from .headless import run_headless, run_replay
from .records import ChoiceEvent, PersistenceError, RunReport, TrialRecord

__all__ = [
    "ChoiceEvent",
    "EngineError",
    "PersistenceError",
    "RunReport",
    "SessionEngine",
    "TrialRecord",
    "run_headless",
    "run_replay",
]
