"""HTTP gateway: thin adapters from endpoints to engine commands.

Wire contract (paths are fixed):

    POST /definitions                GET  /definitions/{id}
    POST /instances                  GET  /instances/{id}
    POST /instances/{id}/activities/{aid}/begin
    POST /instances/{id}/activities/{aid}/complete
    POST /instances/{id}/activities/{aid}/aggregate
    POST /instances/{id}/activities/{aid}/delegate/start
    POST /instances/{id}/activities/{aid}/delegate/finish
    POST /instances/{id}/terminate
    GET  /worklist                   GET  /public/tasks
    POST /users/register             POST /public/tasks/{item}/claim
    POST /public/tasks/{item}/submissions/{exec}
    POST /public/tasks/{item}/abandon/{exec}
    GET  /events?from=seq            GET  /health
    POST /clock/advance              (LOGICAL clock mode only)

Anonymous access: GET /public/tasks, POST /users/register, GET /health.
External workers authenticate with the bearer token issued at registration
(their user id); everything else needs an internal user's bearer token from
the service config.

All mutating requests funnel through one process-wide lock, which realizes
the per-instance single-writer rule. In LOGICAL clock mode responses carry
no wall-clock-dependent bytes; deadline firing is driven by POST
/clock/advance. In WALL mode a background ticker fires due deadlines once
per second of wall time.
"""

from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .canonical import canonical_document
from .clock import LogicalClock, WallClock
from .engine import DEFAULT_RETENTION_SPAN, Engine, InternalUser
from .errors import (
    AuthorizationDenied,
    CrowdflowError,
    DuplicateDefinition,
    IllegalState,
    InvalidRequest,
    StorageFailure,
)
from .eventstore import EventStore
from .model import parse_definition_doc


@dataclass
class ApiConfig:
    data_dir: str
    bind: str = "127.0.0.1:8099"
    retention_span: int = DEFAULT_RETENTION_SPAN
    clock_mode: str = "LOGICAL"  # LOGICAL (tests) | WALL (deploy)
    internal_users: list[dict] = field(default_factory=list)
    ui_dir: Optional[str] = None  # built frontend bundle, mounted at /ui

    def validate(self) -> None:
        if self.retention_span <= 0:
            raise StorageFailure("retention_span must be > 0")
        if self.clock_mode not in ("LOGICAL", "WALL"):
            raise StorageFailure(f"unknown clock mode {self.clock_mode!r}")
        path = Path(self.data_dir)
        try:
            path.mkdir(parents=True, exist_ok=True)
            probe = path / ".writable"
            probe.write_text("ok")
            probe.unlink()
        except OSError as exc:
            raise StorageFailure(f"data dir {self.data_dir} not writable: {exc}") from exc

    @property
    def host(self) -> str:
        return self.bind.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind.rsplit(":", 1)[1])


def load_config(path: str | Path) -> ApiConfig:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ApiConfig(
        data_dir=doc["data_dir"],
        bind=doc.get("bind", "127.0.0.1:8099"),
        retention_span=doc.get("retention_span", DEFAULT_RETENTION_SPAN),
        clock_mode=doc.get("clock_mode", "LOGICAL"),
        internal_users=doc.get("internal_users", []),
        ui_dir=doc.get("ui_dir"),
    )


def build_engine(config: ApiConfig) -> Engine:
    """Construct the engine from the data directory: load persisted
    definitions, replay the event log, and resume the clock from the last
    evented time."""
    config.validate()
    data = Path(config.data_dir)
    store = EventStore(data / "events.log")
    if config.clock_mode == "WALL":
        clock = WallClock(origin=_last_at(store))
    else:
        clock = LogicalClock(start=_last_at(store))
    engine = Engine(store=store, clock=clock, retention_span=config.retention_span)
    defs_dir = data / "definitions"
    defs_dir.mkdir(exist_ok=True)
    for def_path in sorted(defs_dir.glob("*.json")):
        defn = parse_definition_doc(json.loads(def_path.read_text(encoding="utf-8")))
        engine.add_definition(defn)
    for entry in config.internal_users:
        engine.add_internal_user(
            entry["user_id"],
            entry.get("roles", []),
            display_name=entry.get("display_name", ""),
            token=entry.get("token", ""),
        )
    return engine


def _last_at(store: EventStore) -> int:
    events = store.events()
    return events[-1].at if events else 0


class StartInstanceBody(BaseModel):
    definition_id: str


class ClockAdvanceBody(BaseModel):
    by: Optional[int] = None
    to: Optional[int] = None


def create_app(config: ApiConfig, engine: Optional[Engine] = None) -> FastAPI:
    engine = engine if engine is not None else build_engine(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if config.clock_mode == "WALL":
            app.state.ticker = _DeadlineTicker(app)
            app.state.ticker.start()
        yield
        if app.state.ticker is not None:
            app.state.ticker.stop()
        engine.store.close()

    app = FastAPI(title="crowdflow gateway", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.engine = engine
    app.state.config = config
    app.state.lock = threading.Lock()
    app.state.ticker = None

    @app.exception_handler(CrowdflowError)
    async def _domain_error(request: Request, exc: CrowdflowError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_doc())

    # -- auth helpers ------------------------------------------------------

    def bearer(request: Request) -> Optional[str]:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def require_internal(request: Request) -> InternalUser:
        token = bearer(request)
        if token:
            for user in engine.internal_users.values():
                if user.token == token:
                    return user
        raise AuthorizationDenied("internal bearer token required")

    def require_external(request: Request) -> str:
        token = bearer(request)
        if token:
            user = engine.state.users.get(token)
            if user is not None and not user.purged:
                return user.user_id
        raise AuthorizationDenied("worker bearer token (issued user id) required")

    # -- definitions -------------------------------------------------------

    @app.post("/definitions", status_code=201)
    def upload_definition(request: Request, doc: dict = Body(...)):
        require_internal(request)
        defn = parse_definition_doc(doc)
        with app.state.lock:
            if defn.id in engine.definitions:
                raise DuplicateDefinition(defn.id)
            engine.add_definition(defn)
            defs_dir = Path(config.data_dir) / "definitions"
            defs_dir.mkdir(parents=True, exist_ok=True)
            (defs_dir / f"{defn.id}.json").write_text(
                canonical_document(defn.to_doc()), encoding="utf-8")
        return {"id": defn.id, "activities": len(defn.activities)}

    @app.get("/definitions/{definition_id}")
    def get_definition(definition_id: str, request: Request):
        require_internal(request)
        with app.state.lock:
            return engine.get_definition(definition_id).to_doc()

    # -- instances ---------------------------------------------------------

    @app.post("/instances", status_code=201)
    def start_instance(request: Request, body: StartInstanceBody):
        user = require_internal(request)
        with app.state.lock:
            return engine.start_instance(body.definition_id, initiator=user.user_id)

    @app.get("/instances/{instance_id}")
    def get_instance(instance_id: str, request: Request):
        require_internal(request)
        with app.state.lock:
            return engine.query_instance(instance_id)

    @app.post("/instances/{instance_id}/activities/{activity_id}/begin")
    def begin_activity(instance_id: str, activity_id: str, request: Request):
        user = require_internal(request)
        with app.state.lock:
            return engine.begin_activity(instance_id, activity_id, user.user_id)

    @app.post("/instances/{instance_id}/activities/{activity_id}/complete")
    def complete_activity(instance_id: str, activity_id: str, request: Request,
                          body: dict = Body(default={})):
        user = require_internal(request)
        with app.state.lock:
            return engine.complete_activity(instance_id, activity_id,
                                            result=body.get("result"), actor=user.user_id)

    @app.post("/instances/{instance_id}/terminate")
    def terminate_instance(instance_id: str, request: Request, body: dict = Body(default={})):
        require_internal(request)
        with app.state.lock:
            return engine.terminate_instance(instance_id, reason=body.get("reason", ""))

    @app.post("/instances/{instance_id}/activities/{activity_id}/aggregate")
    def aggregate(instance_id: str, activity_id: str, request: Request,
                  body: dict = Body(default={})):
        require_internal(request)
        with app.state.lock:
            return engine.aggregate_activity(instance_id, activity_id,
                                             selection=body.get("selection"))

    @app.post("/instances/{instance_id}/activities/{activity_id}/delegate/start")
    def delegate_start(instance_id: str, activity_id: str, request: Request,
                       body: dict = Body(default={})):
        user = require_internal(request)
        with app.state.lock:
            return engine.delegate_start(instance_id, activity_id, user.user_id,
                                         note=body.get("note", ""))

    @app.post("/instances/{instance_id}/activities/{activity_id}/delegate/finish")
    def delegate_finish(instance_id: str, activity_id: str, request: Request,
                        body: dict = Body(default={})):
        user = require_internal(request)
        with app.state.lock:
            return engine.delegate_finish(instance_id, activity_id, user.user_id,
                                          result=body.get("result"))

    # -- worklists ----------------------------------------------------------

    @app.get("/worklist")
    def worklist(request: Request):
        user = require_internal(request)
        with app.state.lock:
            return {"items": engine.list_for_user(user.user_id)}

    @app.get("/public/tasks")
    def public_tasks():
        with app.state.lock:
            return {"items": engine.list_public()}

    @app.post("/users/register", status_code=201)
    def register(body: dict = Body(...)):
        with app.state.lock:
            return engine.register_external(body.get("display_name", ""),
                                            body.get("contact", ""))

    @app.post("/public/tasks/{item_id}/claim", status_code=201)
    def claim(item_id: str, request: Request):
        worker = require_external(request)
        with app.state.lock:
            return engine.claim_public(item_id, worker)

    @app.post("/public/tasks/{item_id}/submissions/{execution_id}", status_code=201)
    def submit(item_id: str, execution_id: str, request: Request, body: dict = Body(default={})):
        worker = require_external(request)
        with app.state.lock:
            return engine.submit_public(item_id, execution_id, body.get("payload"), worker)

    @app.post("/public/tasks/{item_id}/abandon/{execution_id}")
    def abandon(item_id: str, execution_id: str, request: Request):
        worker = require_external(request)
        with app.state.lock:
            return engine.abandon_public(item_id, execution_id, worker)

    # -- events / infrastructure ---------------------------------------------

    @app.get("/events")
    def events(request: Request, from_seq: int = Query(1, alias="from")):
        require_internal(request)
        with app.state.lock:
            batch = [e.to_doc() for e in engine.store.events(from_seq=from_seq)]
            return {"events": batch, "last_seq": engine.store.last_seq}

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "clock_mode": config.clock_mode,
            "now": engine.now,
            "last_seq": engine.store.last_seq,
        }

    @app.post("/clock/advance")
    def clock_advance(request: Request, body: ClockAdvanceBody):
        require_internal(request)
        if config.clock_mode != "LOGICAL":
            raise IllegalState("clock advance is available in LOGICAL mode only")
        if (body.by is None) == (body.to is None):
            raise InvalidRequest("supply exactly one of 'by' or 'to'")
        with app.state.lock:
            fired = engine.advance_clock(by=body.by, to=body.to)
            return {"now": engine.now, "fired": fired}

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


class _DeadlineTicker(threading.Thread):
    """WALL mode only: fires due session deadlines as wall time passes."""

    def __init__(self, app, interval: float = 0.25):
        super().__init__(daemon=True)
        self._app = app
        self._interval = interval
        self._halt = threading.Event()

    def run(self) -> None:
        engine = self._app.state.engine
        while not self._halt.wait(self._interval):
            with self._app.state.lock:
                engine.fire_due_deadlines()

    def stop(self) -> None:
        self._halt.set()
        self.join(timeout=2)


def serve(config: ApiConfig):
    """Blocking server entrypoint used by the CLI."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
