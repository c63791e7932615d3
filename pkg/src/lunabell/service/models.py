"""Pydantic request/response and channel message models.

The WebSocket channel speaks JSON messages discriminated by a `type`
field: hello, claim_role, choice (client to server) and hello, stats,
report, error (server to client). REST endpoints reuse the same payload
shapes so a thin client can mix both.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from .. import __version__


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str = __version__


# --- computational endpoints ---


class ArmBudgetModel(BaseModel):
    label: str
    geometric_db: float = Field(ge=0)
    atmospheric_db: float = Field(default=0.0, ge=0)
    optics_db: float = Field(default=0.0, ge=0)
    detector_db: float = Field(default=0.0, ge=0)


class BudgetRequest(BaseModel):
    preset: Optional[str] = None
    arms: Optional[list[ArmBudgetModel]] = None


class BudgetResponse(BaseModel):
    arms: list[dict[str, Any]]
    pair_loss_db: float
    pair_transmittance: float
    table: str


class WindowsRequest(BaseModel):
    delta_t_s: float = Field(default=0.5, ge=0)
    system_delay_s: float = Field(default=0.05, ge=0)
    side_length_km: float = Field(default=3.8e5, gt=0)
    use_paper_rounding: bool = True


class WindowsResponse(BaseModel):
    side_length_km: float
    one_way_light_time_s: float
    exact_light_time_s: float
    delta_t_s: float
    locality_window_s: float
    freedom_of_choice_window_s: float
    combined_window_s: float


class PlannerRequest(BaseModel):
    visibility: float = Field(gt=0, le=1)
    pair_rate_hz: float = Field(gt=0)
    pair_loss_db: float = Field(ge=0)
    k_sigma: float = Field(gt=0)


class PlannerResponse(BaseModel):
    seconds: float
    hours: float
    pairs_per_second: float
    pairs_needed: float


# --- session lifecycle ---


class SessionCreateRequest(BaseModel):
    preset: str = "interactive_90db"
    overrides: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    duration_s: Optional[float] = None
    persist_dir: Optional[str] = None


class SessionInfo(BaseModel):
    session_id: str
    state: str
    preset: str
    pair_loss_db: float
    duration_s: float
    roles_claimed: dict[str, bool]
    roles_connected: dict[str, bool]


class ClaimRequest(BaseModel):
    role: Literal["alice", "bob"]


class ClaimResponse(BaseModel):
    session_id: str
    role: str
    state: str


class ChoiceRequest(BaseModel):
    role: Literal["alice", "bob"]
    setting: Literal[0, 1]
    choice_id: Optional[str] = None
    client_time_s: Optional[float] = None


class ChoiceResponse(BaseModel):
    accepted: bool
    duplicate: bool = False


# --- channel messages ---


class HelloMessage(BaseModel):
    type: Literal["hello"] = "hello"
    session_id: str
    role: Optional[str] = None
    server_version: str = __version__
    message: str = ""


class ClaimRoleMessage(BaseModel):
    type: Literal["claim_role"] = "claim_role"
    role: Literal["alice", "bob"]


class ChoiceMessage(BaseModel):
    type: Literal["choice"] = "choice"
    setting: Literal[0, 1]
    choice_id: Optional[str] = None
    client_time_s: Optional[float] = None


class StatsMessage(BaseModel):
    type: Literal["stats"] = "stats"
    seq: int
    session_id: str
    state: str
    session_time_s: float
    roles_claimed: dict[str, bool]
    roles_connected: dict[str, bool]
    n_choices_alice: int
    n_choices_bob: int
    n_pairs: int
    n_counted: int
    counts_table: list
    s_value: Optional[float] = None
    s_sigma: Optional[float] = None
    pairs_fully_valid: int = 0
    locality: dict[str, int]
    freedom_of_choice: dict[str, int]
    current_settings: dict[str, Optional[int]] = Field(default_factory=dict)
    pair_loss_db: float
    geometry_enabled: bool


class ReportMessage(BaseModel):
    type: Literal["report"] = "report"
    session_id: str
    report: dict[str, Any]
    report_hash: str
    text: str


class ErrorMessage(BaseModel):
    type: Literal["error"] = "error"
    code: str
    message: str
