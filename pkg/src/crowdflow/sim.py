"""Deterministic simulated crowd.

Generates a user population with the observed platform role mix (defaults:
90.52% workers only, 3.59% employers only, 5.89% both), then drives the
engine end to end over logical time: employers start instances, the operator
works HUMAN and DELEGATED activities, workers arrive stochastically at OPEN
crowdsourcing sessions, claim, and then submit, abandon, or hang until the
deadline force-terminates them.

Everything is drawn from seeded generators over integer ticks, so one
(seed, config, definitions) triple produces one event log, byte for byte.
The population stream is Random(seed); behavior uses an independent stream
so generate_population() standalone matches the population inside run().

Claim inter-arrival times are exponential with mean ``arrival`` ticks;
``arrival = 0`` disables claiming entirely (the "nobody came" scenario).
Work time is geometric-ish: 1 + floor(Exp(mean)) ticks. The engine runs with
invariant monitors attached; any violation aborts the run.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .clock import LogicalClock
from .engine import Engine
from .errors import (
    CapacityReached,
    CrowdflowError,
    DuplicateActiveClaim,
    SessionClosedError,
)
from .eventstore import EventStore
from .model import (
    ActivityDef,
    CsConfig,
    ProcessDefinition,
    RoleDef,
    TaskKind,
    Transition,
    parse_definition_doc,
)
from .monitors import TransitionMonitor
from .state import ActivityState, ProcessState, SessionStatus

DEFAULT_ROLE_MIX = (0.9052, 0.0359, 0.0589)  # worker_only, employer_only, both

WORKER_ONLY = "worker_only"
EMPLOYER_ONLY = "employer_only"
BOTH = "both"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    population_size: int = 1000
    role_mix: tuple[float, float, float] = DEFAULT_ROLE_MIX
    arrival: float = 5.0
    completion_prob: float = 0.8
    abandon_prob: float = 0.1
    work_time_mean: float = 5.0
    horizon: int = 400
    instances: int = 5

    def validate(self) -> None:
        if abs(sum(self.role_mix) - 1.0) > 1e-9:
            raise ValueError(f"role_mix must sum to 1, got {sum(self.role_mix)}")
        if any(p < 0 for p in self.role_mix):
            raise ValueError("role_mix proportions must be non-negative")
        if not 0.0 <= self.completion_prob <= 1.0:
            raise ValueError("completion_prob must be in [0, 1]")
        if not 0.0 <= self.abandon_prob <= 1.0:
            raise ValueError("abandon_prob must be in [0, 1]")
        if self.completion_prob + self.abandon_prob > 1.0 + 1e-9:
            raise ValueError("completion_prob + abandon_prob must not exceed 1")
        if self.population_size <= 0:
            raise ValueError("population_size must be positive")
        if self.horizon <= 0 or self.work_time_mean <= 0:
            raise ValueError("horizon and work_time_mean must be positive")
        if self.arrival < 0:
            raise ValueError("arrival must be >= 0 (0 disables claims)")
        if self.instances < 0:
            raise ValueError("instances must be >= 0")


@dataclass(frozen=True)
class SimUser:
    sim_id: str
    role: str


def generate_population(config: SimConfig) -> list[SimUser]:
    """Draw exactly population_size users from the configured role mix."""
    config.validate()
    rng = random.Random(config.seed)
    w, e, _ = config.role_mix
    users = []
    for i in range(config.population_size):
        u = rng.random()
        if u < w:
            role = WORKER_ONLY
        elif u < w + e:
            role = EMPLOYER_ONLY
        else:
            role = BOTH
        users.append(SimUser(sim_id=f"p-{i + 1:06d}", role=role))
    return users


def role_counts(population: list[SimUser]) -> dict[str, int]:
    counts = {WORKER_ONLY: 0, EMPLOYER_ONLY: 0, BOTH: 0}
    for user in population:
        counts[user.role] += 1
    return counts


@dataclass
class SessionRow:
    session_id: str
    opened_at: int
    deadline: int
    claims: int
    submissions: int
    force_terminated: int
    abandoned: int
    outcome: str

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "opened_at": self.opened_at,
            "deadline": self.deadline,
            "claims": self.claims,
            "submissions": self.submissions,
            "force_terminated": self.force_terminated,
            "abandoned": self.abandoned,
            "outcome": self.outcome,
        }


@dataclass
class SimReport:
    seed: int
    tasks_opened: int = 0
    claims: int = 0
    submissions: int = 0
    force_terminated: int = 0
    abandoned: int = 0
    zero_claim_sessions: int = 0
    instances_started: int = 0
    instances_completed: int = 0
    instances_failed: int = 0
    instances_running: int = 0
    role_mix_empirical: dict[str, float] = field(default_factory=dict)
    sessions: list[SessionRow] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "seed": self.seed,
            "tasks_opened": self.tasks_opened,
            "claims": self.claims,
            "submissions": self.submissions,
            "force_terminated": self.force_terminated,
            "abandoned": self.abandoned,
            "zero_claim_sessions": self.zero_claim_sessions,
            "instances_started": self.instances_started,
            "instances_completed": self.instances_completed,
            "instances_failed": self.instances_failed,
            "instances_running": self.instances_running,
            "role_mix_empirical": dict(sorted(self.role_mix_empirical.items())),
            "sessions": [row.to_doc() for row in self.sessions],
        }


class _Schedule:
    """Tick-indexed FIFO action queue; within a tick, insertion order."""

    def __init__(self):
        self._by_tick: dict[int, list] = {}

    def at(self, tick: int, action, *args) -> None:
        self._by_tick.setdefault(tick, []).append((action, args))

    def pop(self, tick: int) -> list:
        return self._by_tick.pop(tick, [])

    def pending_after(self, tick: int) -> bool:
        return any(t > tick for t in self._by_tick)


class CrowdSimulation:
    def __init__(self, config: SimConfig, definitions: list[ProcessDefinition],
                 engine: Optional[Engine] = None):
        config.validate()
        self.config = config
        self.definitions = list(definitions)
        self.population = generate_population(config)
        self.rng = random.Random(config.seed + 1_000_003)  # behavior stream
        self.engine = engine if engine is not None else Engine(
            store=EventStore(), clock=LogicalClock())
        self.monitor = TransitionMonitor()
        self.engine.add_listener(self.monitor)
        self.schedule = _Schedule()
        self.workers = [u for u in self.population if u.role != EMPLOYER_ONLY]
        self.employers = [u for u in self.population if u.role != WORKER_ONLY]
        self._registered: dict[str, str] = {}  # sim_id -> engine user id
        self._pumped: set[str] = set()  # session keys with an active claim pump
        self._driven_complete: set[str] = set()

        roles = sorted({r.id for d in self.definitions for r in d.roles})
        self.engine.add_internal_user("sim-operator", roles)
        for defn in self.definitions:
            self.engine.add_definition(defn)

    # -- run loop ------------------------------------------------------------

    def run(self) -> SimReport:
        cfg = self.config
        for i in range(cfg.instances):
            start_at = self.rng.randrange(0, max(1, cfg.horizon // 2))
            defn = self.definitions[i % len(self.definitions)]
            initiator = (self.employers[i % len(self.employers)].sim_id
                         if self.employers else "sim-operator")
            self.schedule.at(start_at, self._start_instance, defn.id, initiator)

        for tick in range(cfg.horizon + 1):
            fired = self.engine.advance_clock(to=tick)
            for outcome in fired:
                instance_id = outcome["session"].split("/", 1)[0]
                self._drive(instance_id)
            for action, args in self.schedule.pop(tick):
                action(*args)
        return self._report()

    def _start_instance(self, definition_id: str, initiator: str) -> None:
        snap = self.engine.start_instance(definition_id, initiator=initiator)
        self._drive(snap["instance"]["id"])

    def _drive(self, instance_id: str) -> None:
        """Push one instance forward: begin whatever is AVAILABLE, schedule
        completions for active internal work, pump claims for open sessions."""
        inst = self.engine.state.instance(instance_id)
        if inst is None or inst.state != ProcessState.RUNNING:
            return
        defn = self.engine.definitions[inst.definition_id]
        now = self.engine.now
        for adef in defn.activities:
            act = inst.activity_instances[adef.id]
            if act.state == ActivityState.AVAILABLE:
                if adef.kind == TaskKind.HUMAN:
                    self.engine.begin_activity(instance_id, adef.id, "sim-operator")
                    done_at = now + self._work_ticks()
                    self.schedule.at(done_at, self._complete_internal, instance_id, adef.id)
                elif adef.kind == TaskKind.DELEGATED:
                    self.engine.delegate_start(instance_id, adef.id, "sim-operator",
                                               note="external vendor")
                    done_at = now + self._work_ticks()
                    self.schedule.at(done_at, self._finish_delegated, instance_id, adef.id)
                elif adef.kind == TaskKind.CS:
                    self.engine.begin_activity(instance_id, adef.id, "sim-operator")
            if adef.kind == TaskKind.CS:
                session = self.engine.state.session(instance_id, adef.id)
                if (session is not None and session.status == SessionStatus.OPEN
                        and session.key not in self._pumped):
                    self._pumped.add(session.key)
                    if self.config.arrival > 0 and self.workers:
                        self.schedule.at(now + self._arrival_ticks(), self._claim_attempt,
                                         instance_id, adef.id)

    def _complete_internal(self, instance_id: str, activity_id: str) -> None:
        inst = self.engine.state.instance(instance_id)
        if inst is None or inst.state != ProcessState.RUNNING:
            return
        if inst.activity_instances[activity_id].state != ActivityState.ACTIVE:
            return
        self.engine.complete_activity(instance_id, activity_id,
                                      result={"by": "sim-operator"})
        self._drive(instance_id)

    def _finish_delegated(self, instance_id: str, activity_id: str) -> None:
        inst = self.engine.state.instance(instance_id)
        if inst is None or inst.state != ProcessState.RUNNING:
            return
        if inst.activity_instances[activity_id].state != ActivityState.ACTIVE:
            return
        self.engine.delegate_finish(instance_id, activity_id, "sim-operator",
                                    result={"delivered": True})
        self._drive(instance_id)

    def _claim_attempt(self, instance_id: str, activity_id: str) -> None:
        session = self.engine.state.session(instance_id, activity_id)
        if session is None or session.status != SessionStatus.OPEN:
            self._pumped.discard(f"{instance_id}/{activity_id}")
            return
        now = self.engine.now
        if now >= session.deadline:
            return
        item_id = f"{instance_id}:{activity_id}"
        for _ in range(4):  # a few tries in case the drawn worker is busy here
            sim_user = self.workers[self.rng.randrange(len(self.workers))]
            user_id = self._ensure_registered(sim_user)
            try:
                copy = self.engine.claim_public(item_id, user_id)
            except DuplicateActiveClaim:
                continue
            except (SessionClosedError, CapacityReached):
                return
            self._plan_copy_fate(item_id, copy["execution_id"], user_id, now)
            break
        self.schedule.at(now + self._arrival_ticks(), self._claim_attempt,
                         instance_id, activity_id)

    def _plan_copy_fate(self, item_id: str, execution_id: str, user_id: str, now: int) -> None:
        roll = self.rng.random()
        done_at = now + self._work_ticks()
        if roll < self.config.completion_prob:
            self.schedule.at(done_at, self._submit, item_id, execution_id, user_id)
        elif roll < self.config.completion_prob + self.config.abandon_prob:
            self.schedule.at(done_at, self._abandon, item_id, execution_id, user_id)
        # else: the worker hangs; the deadline will force-terminate the copy.

    def _submit(self, item_id: str, execution_id: str, user_id: str) -> None:
        try:
            self.engine.submit_public(item_id, execution_id,
                                      {"worker": user_id, "ok": True}, user_id)
        except CrowdflowError:
            return  # deadline beat the worker; copy was force-terminated

    def _abandon(self, item_id: str, execution_id: str, user_id: str) -> None:
        try:
            self.engine.abandon_public(item_id, execution_id, user_id)
        except CrowdflowError:
            return

    def _ensure_registered(self, sim_user: SimUser) -> str:
        uid = self._registered.get(sim_user.sim_id)
        if uid is None:
            doc = self.engine.register_external(sim_user.sim_id,
                                                f"{sim_user.sim_id}@crowd.example")
            uid = doc["user_id"]
            self._registered[sim_user.sim_id] = uid
        return uid

    def _work_ticks(self) -> int:
        return 1 + int(self.rng.expovariate(1.0 / self.config.work_time_mean))

    def _arrival_ticks(self) -> int:
        return 1 + int(self.rng.expovariate(1.0 / self.config.arrival))

    # -- reporting -------------------------------------------------------------

    def _report(self) -> SimReport:
        counts = role_counts(self.population)
        total = len(self.population)
        report = SimReport(
            seed=self.config.seed,
            role_mix_empirical={k: v / total for k, v in counts.items()},
        )
        for event in self.engine.store.events():
            if event.kind == "SessionOpened":
                report.tasks_opened += 1
            elif event.kind == "ExecutionSpawned":
                report.claims += 1
            elif event.kind == "ResultSubmitted":
                report.submissions += 1
            elif event.kind == "ExecutionForceTerminated":
                report.force_terminated += 1
            elif event.kind == "ExecutionAbandoned":
                report.abandoned += 1
        for inst in self.engine.state.instances.values():
            report.instances_started += 1
            if inst.state == ProcessState.COMPLETED:
                report.instances_completed += 1
            elif inst.state == ProcessState.FAILED:
                report.instances_failed += 1
            elif inst.state == ProcessState.RUNNING:
                report.instances_running += 1
        for key in sorted(self.engine.state.sessions):
            session = self.engine.state.sessions[key]
            by_state = {"COMPLETED": 0, "FORCE_TERMINATED": 0, "ABANDONED": 0, "ACTIVE": 0}
            for copy in session.executions:
                by_state[copy.state.value] += 1
            if session.status == SessionStatus.CLOSED and not session.executions:
                report.zero_claim_sessions += 1
            report.sessions.append(SessionRow(
                session_id=key,
                opened_at=session.opened_at,
                deadline=session.deadline,
                claims=len(session.executions),
                submissions=by_state["COMPLETED"],
                force_terminated=by_state["FORCE_TERMINATED"],
                abandoned=by_state["ABANDONED"],
                outcome=session.outcome or session.status.value,
            ))
        return report


def run(config: SimConfig, definitions: list[ProcessDefinition],
        engine: Optional[Engine] = None) -> tuple[SimReport, Engine]:
    """Run one simulation; returns the report and the engine (for its log)."""
    sim = CrowdSimulation(config, definitions, engine=engine)
    report = sim.run()
    return report, sim.engine


# --------------------------------------------------------------------------
# Rendering


CSV_COLUMNS = ("session_id", "opened_at", "deadline", "claims", "submissions",
               "force_terminated", "abandoned", "outcome")


def render_csv(report: SimReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.sessions:
        doc = row.to_doc()
        lines.append(",".join(str(doc[col]) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def render_text(report: SimReport) -> str:
    mix = report.role_mix_empirical
    closed = [r for r in report.sessions if r.outcome in ("COMPLETE", "FAILED", "TERMINATED")]
    fill = (sum(r.submissions for r in closed) / len(closed)) if closed else 0.0
    lines = [
        f"seed:                 {report.seed}",
        f"instances started:    {report.instances_started}",
        f"  completed:          {report.instances_completed}",
        f"  failed:             {report.instances_failed}",
        f"  still running:      {report.instances_running}",
        f"sessions opened:      {report.tasks_opened}",
        f"  zero-claim:         {report.zero_claim_sessions}",
        f"claims:               {report.claims}",
        f"  submissions:        {report.submissions}",
        f"  force-terminated:   {report.force_terminated}",
        f"  abandoned:          {report.abandoned}",
        f"mean submissions per closed session: {fill:.4f}",
        "empirical role mix:   "
        + ", ".join(f"{k}={mix.get(k, 0.0):.4f}" for k in (WORKER_ONLY, EMPLOYER_ONLY, BOTH)),
    ]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Config files and built-in definitions


def load_sim_config(path: str | Path) -> tuple[SimConfig, list[ProcessDefinition]]:
    """Sim config document: same JSON family as definitions. ``definitions``
    holds paths relative to the config file; omitted means the built-ins."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    mix = doc.get("role_mix")
    role_mix = (
        (mix["worker_only"], mix["employer_only"], mix["both"])
        if isinstance(mix, dict) else DEFAULT_ROLE_MIX
    )
    work_time = doc.get("work_time", {})
    config = SimConfig(
        seed=doc.get("seed", 0),
        population_size=doc.get("population_size", 1000),
        role_mix=role_mix,
        arrival=doc.get("arrival", 5.0),
        completion_prob=doc.get("completion_prob", 0.8),
        abandon_prob=doc.get("abandon_prob", 0.1),
        work_time_mean=work_time.get("mean", 5.0) if isinstance(work_time, dict) else float(work_time or 5.0),
        horizon=doc.get("horizon", 400),
        instances=doc.get("instances", 5),
    )
    definitions = []
    for rel in doc.get("definitions", []):
        def_doc = json.loads((path.parent / rel).read_text(encoding="utf-8"))
        definitions.append(parse_definition_doc(def_doc))
    if not definitions:
        definitions = builtin_definitions()
    return config, definitions


def builtin_definitions(open_duration: int = 60) -> list[ProcessDefinition]:
    cs = CsConfig(open_duration=open_duration, instructions="simulated crowd task")
    prep_review = ProcessDefinition(
        id="sim-prep-crowd-review",
        name="Prepare, crowdsource, review",
        activities=(
            ActivityDef(id="prepare", kind=TaskKind.HUMAN, role="staff"),
            ActivityDef(id="crowd", kind=TaskKind.CS, cs_config=cs),
            ActivityDef(id="review", kind=TaskKind.HUMAN, role="staff"),
        ),
        transitions=(
            Transition(from_id="prepare", to_id="crowd"),
            Transition(from_id="crowd", to_id="review"),
        ),
        roles=(RoleDef(id="staff"),),
    )
    crowd_only = ProcessDefinition(
        id="sim-crowd-only",
        name="Single crowdsourced step",
        activities=(ActivityDef(id="crowd", kind=TaskKind.CS, cs_config=cs),),
    )
    return [prep_review, crowd_only]
