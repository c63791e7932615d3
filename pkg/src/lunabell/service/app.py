"""FastAPI service wrapping the simulation core.

REST endpoints cover the computational surface (link budget, validity
windows, campaign planner) and session lifecycle; a WebSocket per session
carries the bidirectional live channel (claim_role/choice in, stats/
report out). A background ticker advances every open session and fans
stats snapshots out to subscribers, so all engine mutation happens on the
event loop (single writer).
"""

from __future__ import annotations

import asyncio
import contextlib
from dataclasses import dataclass, field, replace

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .. import __version__
from ..analysis import NoViolationError, expected_coincidences, time_to_violation
from ..config import ConfigError, SESSION_PRESETS, SessionConfig, preset_config
from ..linkbudget import (
    PRESETS as BUDGET_PRESETS,
    ArmBudget,
    LinkBudgetError,
    budget_report,
    render_budget_table,
    scenario_total,
    transmittance,
)
from ..session.live import LiveSession, MonotonicClock, SessionError
from ..spacetime import GeometryConfig, SpacetimeError, TimingBudget, window_report
from .models import (
    ArmBudgetModel,
    BudgetRequest,
    BudgetResponse,
    ChoiceMessage,
    ChoiceRequest,
    ChoiceResponse,
    ClaimRequest,
    ClaimResponse,
    ClaimRoleMessage,
    ErrorMessage,
    HealthResponse,
    HelloMessage,
    PlannerRequest,
    PlannerResponse,
    ReportMessage,
    SessionCreateRequest,
    SessionInfo,
    StatsMessage,
    WindowsRequest,
    WindowsResponse,
)

DEFAULT_TICK_INTERVAL_S = 0.25  # two-per-second stats minimum, with margin


@dataclass
class SessionHandle:
    session: LiveSession
    subscribers: list[asyncio.Queue] = field(default_factory=list)
    ws_roles: dict[int, str] = field(default_factory=dict)


class SessionManager:
    """Owns live sessions and their stats fan-out."""

    def __init__(self, clock=None, tick_interval_s: float = DEFAULT_TICK_INTERVAL_S):
        self.clock = clock or MonotonicClock()
        self.tick_interval_s = tick_interval_s
        self.handles: dict[str, SessionHandle] = {}

    def create(self, request: SessionCreateRequest) -> LiveSession:
        overrides = dict(request.overrides)
        try:
            config = preset_config(request.preset)
            if overrides:
                config = config.with_overrides(overrides)
            updates: dict[str, object] = {"mode": "interactive", "choice_source": "live"}
            if request.seed is not None:
                updates["seed"] = request.seed
            if request.duration_s is not None:
                updates["duration_s"] = request.duration_s
            config = replace(config, **updates)
        except ConfigError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        session = LiveSession(config, clock=self.clock, persist_dir=request.persist_dir)
        self.handles[session.session_id] = SessionHandle(session=session)
        return session

    def get(self, session_id: str) -> SessionHandle:
        handle = self.handles.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return handle

    def broadcast(self, handle: SessionHandle, snapshot: dict | None = None) -> dict:
        if snapshot is None:
            snapshot = handle.session.stats_snapshot()
        for queue in list(handle.subscribers):
            if queue.full():
                with contextlib.suppress(asyncio.QueueEmpty):
                    queue.get_nowait()  # drop oldest; consoles only need latest
            queue.put_nowait(snapshot)
        return snapshot

    async def run_ticker(self) -> None:
        while True:
            await asyncio.sleep(self.tick_interval_s)
            for handle in list(self.handles.values()):
                if handle.session.state == "closed":
                    continue
                self.broadcast(handle, handle.session.tick())


def session_info(session: LiveSession) -> SessionInfo:
    return SessionInfo(
        session_id=session.session_id,
        state=session.state,
        preset=session.config.preset,
        pair_loss_db=session.config.pair_loss_db,
        duration_s=session.config.duration_s,
        roles_claimed={r: s.claimed for r, s in session.roles.items()},
        roles_connected={r: s.connected for r, s in session.roles.items()},
    )


def report_message(session: LiveSession) -> ReportMessage:
    report = session.report
    assert report is not None
    return ReportMessage(
        session_id=session.session_id,
        report=report.to_dict(),
        report_hash=report.report_hash(),
        text=report.render_text(),
    )


def create_app(
    clock=None, tick_interval_s: float = DEFAULT_TICK_INTERVAL_S, auto_tick: bool = True
) -> FastAPI:
    manager = SessionManager(clock=clock, tick_interval_s=tick_interval_s)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        ticker = asyncio.create_task(manager.run_ticker()) if auto_tick else None
        yield
        if ticker is not None:
            ticker.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await ticker

    app = FastAPI(title="lunabell", version=__version__, lifespan=lifespan)
    app.state.manager = manager

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.get("/presets")
    def presets() -> dict:
        return {
            "session_presets": sorted(SESSION_PRESETS),
            "budget_presets": sorted(BUDGET_PRESETS),
        }

    @app.get("/schema/messages")
    def message_schemas() -> dict:
        """JSON schemas of the live-channel message types."""
        return {
            "hello": HelloMessage.model_json_schema(),
            "claim_role": ClaimRoleMessage.model_json_schema(),
            "choice": ChoiceMessage.model_json_schema(),
            "stats": StatsMessage.model_json_schema(),
            "report": ReportMessage.model_json_schema(),
            "error": ErrorMessage.model_json_schema(),
        }

    @app.post("/budget/report", response_model=BudgetResponse)
    def budget(request: BudgetRequest) -> BudgetResponse:
        if request.arms is not None:
            if len(request.arms) != 2:
                raise HTTPException(status_code=422, detail="exactly two arms required")
            try:
                scenario = scenario_total(
                    tuple(
                        ArmBudget(
                            label=a.label,
                            geometric_db=a.geometric_db,
                            atmospheric_db=a.atmospheric_db,
                            optics_db=a.optics_db,
                            detector_db=a.detector_db,
                        )
                        for a in request.arms
                    )
                )
            except LinkBudgetError as e:
                raise HTTPException(status_code=422, detail=str(e)) from e
        else:
            name = request.preset or "paper_table1"
            if name not in BUDGET_PRESETS:
                raise HTTPException(status_code=404, detail=f"unknown budget preset {name!r}")
            scenario = BUDGET_PRESETS[name]
        return BudgetResponse(
            arms=[
                {
                    "label": arm.label,
                    "geometric_db": arm.geometric_db,
                    "atmospheric_db": arm.atmospheric_db,
                    "optics_db": arm.optics_db,
                    "detector_db": arm.detector_db,
                    "total_db": arm.total_db,
                }
                for arm in scenario.arms
            ],
            pair_loss_db=scenario.pair_loss_db,
            pair_transmittance=transmittance(scenario.pair_loss_db),
            table=render_budget_table(scenario),
        )

    @app.post("/spacetime/windows", response_model=WindowsResponse)
    def windows(request: WindowsRequest) -> WindowsResponse:
        try:
            timing = TimingBudget(
                reaction_time_s=max(0.0, request.delta_t_s - request.system_delay_s),
                system_delay_s=request.system_delay_s,
                delta_t_s=request.delta_t_s,
            )
            geometry = GeometryConfig(
                side_length_km=request.side_length_km,
                use_paper_rounding=request.use_paper_rounding,
            )
        except SpacetimeError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        report = window_report(timing, geometry)
        return WindowsResponse(
            side_length_km=report["side_length_km"],
            one_way_light_time_s=report["one_way_light_time_s"],
            exact_light_time_s=report["exact_light_time_s"],
            delta_t_s=report["delta_t_s"],
            locality_window_s=report["locality_window_s"],
            freedom_of_choice_window_s=report["freedom_of_choice_window_s"],
            combined_window_s=report["combined_window_s"],
        )

    @app.post("/planner/time-to-violation", response_model=PlannerResponse)
    def planner(request: PlannerRequest) -> PlannerResponse:
        try:
            seconds = time_to_violation(
                request.visibility, request.pair_rate_hz, request.pair_loss_db, request.k_sigma
            )
        except NoViolationError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        rate = request.pair_rate_hz * transmittance(request.pair_loss_db)
        return PlannerResponse(
            seconds=seconds,
            hours=seconds / 3600.0,
            pairs_per_second=rate,
            pairs_needed=expected_coincidences(request.pair_rate_hz, request.pair_loss_db, seconds),
        )

    # --- session lifecycle ---

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(request: SessionCreateRequest) -> SessionInfo:
        session = manager.create(request)
        return session_info(session)

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def get_session(session_id: str) -> SessionInfo:
        return session_info(manager.get(session_id).session)

    @app.post("/sessions/{session_id}/claim", response_model=ClaimResponse)
    def claim(session_id: str, request: ClaimRequest) -> ClaimResponse:
        handle = manager.get(session_id)
        try:
            handle.session.claim(request.role)
        except SessionError as e:
            status = 409 if e.code == "role-conflict" else 422
            raise HTTPException(status_code=status, detail={"code": e.code, "message": str(e)})
        return ClaimResponse(
            session_id=session_id, role=request.role, state=handle.session.state
        )

    @app.post("/sessions/{session_id}/choices", response_model=ChoiceResponse)
    def submit_choice(session_id: str, request: ChoiceRequest) -> ChoiceResponse:
        handle = manager.get(session_id)
        try:
            accepted = handle.session.submit_choice(
                request.role, request.setting, choice_id=request.choice_id
            )
        except SessionError as e:
            raise HTTPException(status_code=422, detail={"code": e.code, "message": str(e)})
        return ChoiceResponse(accepted=True, duplicate=not accepted)

    @app.get("/sessions/{session_id}/stats", response_model=StatsMessage)
    def stats(session_id: str) -> StatsMessage:
        handle = manager.get(session_id)
        return StatsMessage(**handle.session.stats_snapshot())

    @app.post("/sessions/{session_id}/close", response_model=ReportMessage)
    def close_session(session_id: str) -> ReportMessage:
        handle = manager.get(session_id)
        handle.session.close()
        message = report_message(handle.session)
        manager.broadcast(handle)  # final stats reach subscribers
        return message

    @app.get("/sessions/{session_id}/report", response_model=ReportMessage)
    def get_report(session_id: str) -> ReportMessage:
        handle = manager.get(session_id)
        if handle.session.report is None:
            raise HTTPException(status_code=409, detail="session is not closed yet")
        return report_message(handle.session)

    # --- live channel ---

    @app.websocket("/sessions/{session_id}/ws")
    async def session_channel(websocket: WebSocket, session_id: str) -> None:
        await websocket.accept()
        handle = manager.handles.get(session_id)
        if handle is None:
            await websocket.send_json(
                ErrorMessage(code="unknown-session", message=f"unknown session {session_id!r}").model_dump()
            )
            await websocket.close()
            return
        queue: asyncio.Queue = asyncio.Queue(maxsize=64)
        handle.subscribers.append(queue)
        ws_key = id(websocket)
        await websocket.send_json(
            HelloMessage(session_id=session_id, message="claim a role or spectate").model_dump()
        )

        async def pump_stats() -> None:
            while True:
                snapshot = await queue.get()
                await websocket.send_json(snapshot)

        pump = asyncio.create_task(pump_stats())
        try:
            while True:
                payload = await websocket.receive_json()
                kind = payload.get("type")
                if kind == "hello":
                    await websocket.send_json(
                        HelloMessage(session_id=session_id, role=handle.ws_roles.get(ws_key)).model_dump()
                    )
                elif kind == "claim_role":
                    role = payload.get("role")
                    held = handle.ws_roles.get(ws_key)
                    if held is not None and held != role:
                        # one feed cannot supply both observers
                        await websocket.send_json(
                            ErrorMessage(
                                code="one-feed-two-roles",
                                message=f"this feed already supplies {held!r}; use a second connection",
                            ).model_dump()
                        )
                        continue
                    try:
                        handle.session.claim(role)
                        handle.ws_roles[ws_key] = role
                        await websocket.send_json(
                            HelloMessage(session_id=session_id, role=role, message="role claimed").model_dump()
                        )
                        manager.broadcast(handle)
                    except SessionError as e:
                        await websocket.send_json(ErrorMessage(code=e.code, message=str(e)).model_dump())
                elif kind == "choice":
                    role = handle.ws_roles.get(ws_key)
                    if role is None:
                        await websocket.send_json(
                            ErrorMessage(code="bad-role", message="claim a role before choosing").model_dump()
                        )
                        continue
                    try:
                        handle.session.submit_choice(
                            role, payload.get("setting"), choice_id=payload.get("choice_id")
                        )
                    except SessionError as e:
                        await websocket.send_json(ErrorMessage(code=e.code, message=str(e)).model_dump())
                else:
                    await websocket.send_json(
                        ErrorMessage(code="bad-message", message=f"unknown type {kind!r}").model_dump()
                    )
                if handle.session.state == "closed" and handle.session.report is not None:
                    await websocket.send_json(report_message(handle.session).model_dump())
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await pump
            if queue in handle.subscribers:
                handle.subscribers.remove(queue)
            role = handle.ws_roles.pop(ws_key, None)
            if role is not None:
                handle.session.disconnect(role)

    return app


app = create_app()
