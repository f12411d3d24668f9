"""Session-oriented mission-control service.

Operators create sessions, stream plan/validation/map events over a
replayable sequence-numbered event log, approve plans in step mode, and
send follow-up natural-language corrections mid-mission. Each session's
loop runs in its own thread; event fan-out is read-only.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from queue import Empty, Queue
from typing import Callable

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from fieldplan.loop import LoopConfig, MissionHooks, ModelClient, run_mission
from fieldplan.plan import Plan
from fieldplan.util import canonical_json
from fieldplan.world import WorldScenario

log = logging.getLogger(__name__)

PLANNING = "planning"
AWAITING_APPROVAL = "awaiting_approval"
EXECUTING = "executing"
AWAITING_OPERATOR = "awaiting_operator"
DONE = "done"


class Session:
    """One mission run with a monotonic, replayable event log."""

    def __init__(self, sid: str, spec: str, scenario: WorldScenario, step_mode: bool):
        self.id = sid
        self.spec = spec
        self.scenario = scenario
        self.scenario_id = scenario.id
        self.step_mode = step_mode
        self.state = PLANNING
        self.outcome: str | None = None
        self.events: list[dict] = []
        self._cond = threading.Condition()
        self._approve = threading.Event()
        self._messages: Queue[str] = Queue()

    def append_event(self, kind: str, payload: dict) -> None:
        with self._cond:
            self.events.append({"seq": len(self.events) + 1, "kind": kind,
                                "payload": payload})
            self._cond.notify_all()

    def events_from(self, from_seq: int) -> list[dict]:
        with self._cond:
            return [e for e in self.events if e["seq"] >= from_seq]

    def wait_for_seq(self, seq: int, timeout: float) -> None:
        with self._cond:
            if self.events and self.events[-1]["seq"] >= seq:
                return
            self._cond.wait(timeout)

    def post_message(self, text: str) -> None:
        self._messages.put(text)

    def approve(self) -> None:
        self._approve.set()


class _SessionHooks(MissionHooks):
    def __init__(self, session: Session):
        self.session = session

    def on_event(self, kind: str, payload: dict) -> None:
        s = self.session
        if kind == "validation_failed":
            s.state = PLANNING
        elif kind == "done":
            s.outcome = payload.get("outcome")
            s.state = DONE
        s.append_event(kind, payload)

    def await_approval(self, plan: Plan) -> None:
        s = self.session
        if not s.step_mode:
            s.state = EXECUTING
            return
        s.state = AWAITING_APPROVAL
        s._approve.wait()
        s._approve.clear()
        s.state = EXECUTING

    def await_operator(self, question: str) -> str | None:
        s = self.session
        s.state = AWAITING_OPERATOR
        text = s._messages.get()
        s.state = PLANNING
        return text

    def drain_messages(self) -> list[str]:
        s = self.session
        s.state = PLANNING
        out = []
        while True:
            try:
                out.append(s._messages.get_nowait())
            except Empty:
                return out


@dataclass
class MissionService:
    """Scenario registry plus per-session client construction."""

    scenarios: dict[str, WorldScenario]
    client_factory: Callable[[], ModelClient]
    cfg: LoopConfig = field(default_factory=LoopConfig)

    def __post_init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create_session(self, spec: str, scenario_id: str, step_mode: bool = False) -> Session:
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise KeyError(scenario_id)
        session = Session(uuid.uuid4().hex[:12], spec, scenario, step_mode)
        with self._lock:
            self._sessions[session.id] = session
        thread = threading.Thread(target=self._run, args=(session,), daemon=True,
                                  name=f"session-{session.id}")
        thread.start()
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def _run(self, session: Session) -> None:
        hooks = _SessionHooks(session)
        try:
            run_mission(session.spec, session.scenario, self.client_factory(),
                        self.cfg, hooks=hooks)
        except Exception as exc:  # never leave a session without a done event
            log.exception("session %s crashed", session.id)
            session.outcome = "internal_error"
            session.state = DONE
            session.append_event("done", {"outcome": "internal_error", "error": str(exc)})


class CreateSessionRequest(BaseModel):
    spec: str
    scenario_id: str
    step_mode: bool = False


class MessageRequest(BaseModel):
    text: str


def _session_summary(session: Session) -> dict:
    scenario = session.scenario
    return {
        "id": session.id,
        "spec": session.spec,
        "scenario_id": session.scenario_id,
        "step_mode": session.step_mode,
        "state": session.state,
        "outcome": session.outcome,
        "last_seq": len(session.events),
        "overlays": {
            "comm_sites": [list(s) for s in scenario.comm_sites],
            "geofence": [list(v) for v in scenario.profile.geofence],
            "waypoints": [list(w) for w in scenario.profile.waypoints],
            "grid": scenario.grid.to_dict(),
        },
    }


def create_app(service: MissionService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="fieldplan mission control")

    from fastapi.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            session = service.create_session(req.spec, req.scenario_id, req.step_mode)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown scenario '{req.scenario_id}'")
        return _session_summary(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            session = service.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        return _session_summary(session)

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, req: MessageRequest):
        try:
            session = service.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        if session.state == DONE:
            raise HTTPException(status_code=409,
                                detail=f"session '{session_id}' is done")
        if not req.text.strip():
            raise HTTPException(status_code=400, detail="message text is empty")
        session.post_message(req.text)
        return {"accepted": True}

    @app.post("/sessions/{session_id}/approve")
    def approve(session_id: str):
        try:
            session = service.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        if session.state != AWAITING_APPROVAL:
            raise HTTPException(status_code=409,
                                detail=f"session '{session_id}' is not awaiting approval")
        session.approve()
        return {"approved": True}

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str,
                      from_: int = Query(0, alias="from"),
                      from_seq: int = 0,
                      follow: bool = True):
        try:
            session = service.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session '{session_id}'")
        start_seq = from_ or from_seq

        def frames():
            next_seq = max(1, start_seq)
            while True:
                batch = session.events_from(next_seq)
                for event in batch:
                    next_seq = event["seq"] + 1
                    yield f"id: {event['seq']}\ndata: {canonical_json(event)}\n\n"
                    if event["kind"] == "done":
                        return
                if not follow:
                    return
                session.wait_for_seq(next_seq, timeout=0.25)

        return StreamingResponse(frames(), media_type="text/event-stream")

    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
