"""The workflow enactment service.

Starting an instance materializes a runtime copy of the whole definition:
one activity instance per activity, the start activity AVAILABLE, the rest
INACTIVE. Commands validate against current state, emit events, and the
event fold mutates state - so replaying the log reproduces the live engine
exactly.

The engine object is single-threaded by contract: callers (gateway, sim,
tests) apply commands strictly serially. Deadline firings are injected as
commands during ``advance_clock``, in (deadline, instance, activity) order,
so claim/deadline races resolve by command order.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable, Optional

from .clock import LogicalClock
from .errors import (
    DefinitionValidationError,
    DuplicateDefinition,
    IllegalState,
    RoleDenied,
    StartConditionUnmet,
    UnknownActivity,
    UnknownDefinition,
    UnknownInstance,
)
from .eventstore import EventStore
from .events import Event
from .mesam import MesamManager
from .model import ExecutionPlan, ProcessDefinition, TaskKind, topology, validate_definition
from .state import (
    ActivityState,
    ExecState,
    ProcessState,
    SessionStatus,
    SystemState,
    apply_event,
    instance_snapshot,
)
from .worklist import Worklist

DEFAULT_RETENTION_SPAN = 10_000


@dataclass(frozen=True)
class InternalUser:
    user_id: str
    roles: frozenset[str]
    display_name: str = ""
    token: str = ""

    def to_doc(self) -> dict:
        return {
            "user_id": self.user_id,
            "roles": sorted(self.roles),
            "display_name": self.display_name,
        }


class Engine:
    def __init__(self, *, store: Optional[EventStore] = None, clock: Optional[LogicalClock] = None,
                 retention_span: int = DEFAULT_RETENTION_SPAN):
        self.store = store if store is not None else EventStore()
        self.clock = clock if clock is not None else LogicalClock()
        self.retention_span = retention_span
        self.definitions: dict[str, ProcessDefinition] = {}
        self._plans: dict[str, ExecutionPlan] = {}
        self.internal_users: dict[str, InternalUser] = {}
        self.listeners: list[Callable[[Event, SystemState], None]] = []
        self.state = SystemState()
        for event in self.store.events():
            apply_event(self.state, event)
        self.mesam = MesamManager(self)
        self.worklist = Worklist(self)

    # -- plumbing ----------------------------------------------------------

    @property
    def now(self) -> int:
        return self.clock.now

    def _emit(self, kind: str, instance_id: Optional[str], payload: dict) -> Event:
        event = self.store.append(self.now, kind, instance_id, payload)
        apply_event(self.state, event)
        for listener in self.listeners:
            listener(event, self.state)
        return event

    def add_listener(self, listener: Callable[[Event, SystemState], None]) -> None:
        self.listeners.append(listener)

    def clone(self) -> "Engine":
        """Independent copy for state-space exploration: state and log are
        copied, immutable configuration (definitions, plans, users) is shared,
        listeners are dropped. In-memory stores and logical clocks only."""
        if not isinstance(self.clock, LogicalClock):
            raise ValueError("clone() requires a LogicalClock")
        other = object.__new__(Engine)
        other.store = self.store.fork()
        other.clock = LogicalClock(self.now)
        other.retention_span = self.retention_span
        other.definitions = dict(self.definitions)
        other._plans = dict(self._plans)
        other.internal_users = dict(self.internal_users)
        other.listeners = []
        other.state = copy.deepcopy(self.state)
        other.mesam = MesamManager(other)
        other.worklist = Worklist(other)
        return other

    # -- configuration (not evented: definitions and internal users are
    #    inputs, like the clock; see the data-dir layout in the gateway) ----

    def add_definition(self, defn: ProcessDefinition) -> None:
        if defn.id in self.definitions:
            raise DuplicateDefinition(defn.id)
        report = validate_definition(defn)
        if not report.ok:
            raise DefinitionValidationError(report.violations)
        self.definitions[defn.id] = defn
        self._plans[defn.id] = topology(defn)

    def get_definition(self, definition_id: str) -> ProcessDefinition:
        if definition_id not in self.definitions:
            raise UnknownDefinition(definition_id)
        return self.definitions[definition_id]

    def plan(self, definition_id: str) -> ExecutionPlan:
        return self._plans[definition_id]

    def add_internal_user(self, user_id: str, roles, display_name: str = "", token: str = "") -> InternalUser:
        user = InternalUser(
            user_id=user_id,
            roles=frozenset(roles),
            display_name=display_name or user_id,
            token=token or f"tok-{user_id}",
        )
        self.internal_users[user_id] = user
        return user

    # -- enactment commands -------------------------------------------------

    def start_instance(self, definition_id: str, initiator: Optional[str] = None) -> dict:
        defn = self.get_definition(definition_id)
        if not defn.start_condition.satisfied(self.now):
            raise StartConditionUnmet(
                f"definition {definition_id} not startable at t={self.now}")
        plan = self._plans[definition_id]
        instance_id = f"inst-{self.state.instance_seq + 1:04d}"
        self._emit("ProcessStarted", instance_id, {
            "instance_id": instance_id,
            "definition_id": definition_id,
            "initiator": initiator,
            "activities": [a.id for a in defn.activities],
            "available": [plan.start],
            "data_slots": [d.name for d in defn.wf_data],
        })
        self._run_automatic(instance_id)
        return self.query_instance(instance_id)

    def begin_activity(self, instance_id: str, activity_id: str, actor: str) -> dict:
        inst, adef = self._activity_context(instance_id, activity_id)
        if inst.state != ProcessState.RUNNING:
            raise IllegalState(f"instance {instance_id} is {inst.state.value}")
        act = inst.activity_instances[activity_id]
        if act.state != ActivityState.AVAILABLE:
            raise IllegalState(f"activity {activity_id} is {act.state.value}, not AVAILABLE")

        if adef.kind == TaskKind.HUMAN:
            user = self.internal_users.get(actor)
            if user is None or adef.role not in user.roles:
                raise RoleDenied(f"{actor!r} does not hold role {adef.role!r}")
            self._emit("ActivityStarted", instance_id, {
                "activity_id": activity_id,
                "state": ActivityState.ACTIVE.value,
                "assignee": actor,
            })
        elif adef.kind == TaskKind.CS:
            self._emit("ActivityStarted", instance_id, {
                "activity_id": activity_id,
                "state": ActivityState.OPEN.value,
                "actor": actor,
            })
            self.mesam.open_session(instance_id, activity_id, adef.cs_config)
        elif adef.kind == TaskKind.DELEGATED:
            return self.worklist.delegate_start(instance_id, activity_id, actor, note="")
        else:  # AUTOMATIC activities are driven by the engine itself
            raise IllegalState(f"activity {activity_id} is AUTOMATIC and engine-driven")
        return inst.activity_instances[activity_id].to_doc()

    def complete_activity(self, instance_id: str, activity_id: str, result: object = None,
                          actor: Optional[str] = None) -> dict:
        inst, adef = self._activity_context(instance_id, activity_id)
        if inst.state != ProcessState.RUNNING:
            raise IllegalState(f"instance {instance_id} is {inst.state.value}")
        if adef.kind == TaskKind.DELEGATED:
            return self.worklist.delegate_finish(instance_id, activity_id, actor or "", result)
        if adef.kind == TaskKind.CS:
            raise IllegalState("CS activities complete via their session deadline")
        act = inst.activity_instances[activity_id]
        if act.state != ActivityState.ACTIVE:
            raise IllegalState(f"activity {activity_id} is {act.state.value}, not ACTIVE")
        return self._complete_activity_internal(instance_id, activity_id, result)

    def terminate_instance(self, instance_id: str, reason: str = "") -> dict:
        inst = self.state.instance(instance_id)
        if inst is None:
            raise UnknownInstance(instance_id)
        if inst.state != ProcessState.RUNNING:
            raise IllegalState(f"instance {instance_id} is {inst.state.value}")
        defn = self.definitions[inst.definition_id]
        for adef in defn.activities:
            session = self.state.session(instance_id, adef.id)
            if session is not None and session.status != SessionStatus.CLOSED:
                self._force_close_session(session)
        skipped = [
            a.id for a in defn.activities
            if inst.activity_instances[a.id].state not in
            (ActivityState.COMPLETED, ActivityState.FAILED, ActivityState.SKIPPED)
        ]
        self._emit("InstanceTerminated", instance_id, {"reason": reason, "skipped": skipped})
        return self.query_instance(instance_id)

    def query_instance(self, instance_id: str) -> dict:
        doc = instance_snapshot(self.state, instance_id)
        if doc is None:
            raise UnknownInstance(instance_id)
        return copy.deepcopy(doc)

    # -- clock --------------------------------------------------------------

    def advance_clock(self, *, by: Optional[int] = None, to: Optional[int] = None) -> list[dict]:
        """Move logical time forward, firing every due session deadline as a
        command, in (deadline, instance, activity) order."""
        if (by is None) == (to is None):
            raise ValueError("advance_clock needs exactly one of by= or to=")
        target = self.now + by if by is not None else to
        if target < self.now:
            raise IllegalState(f"cannot advance clock backwards to {target}")
        fired = self.fire_due_deadlines(up_to=target)
        self.clock.advance_to(target)
        return fired

    def fire_due_deadlines(self, up_to: Optional[int] = None) -> list[dict]:
        """Fire every OPEN session whose deadline is <= up_to (default: now).
        A LogicalClock is stepped to each deadline so events carry the exact
        firing time; a WallClock has already passed it."""
        target = self.now if up_to is None else up_to
        fired: list[dict] = []
        while True:
            due = [
                s for s in self.state.sessions.values()
                if s.status == SessionStatus.OPEN and s.deadline <= target
            ]
            if not due:
                break
            session = min(due, key=lambda s: (s.deadline, s.instance_id, s.activity_id))
            if isinstance(self.clock, LogicalClock) and self.clock.now < session.deadline:
                self.clock.advance_to(session.deadline)
            fired.append(self.mesam.on_deadline(session.instance_id, session.activity_id))
        return fired

    # -- worklist facade ------------------------------------------------------

    def list_for_user(self, user_id: str) -> list[dict]:
        return self.worklist.list_for_user(user_id)

    def list_public(self) -> list[dict]:
        return self.worklist.list_public()

    def register_external(self, display_name: str, contact: str) -> dict:
        return self.worklist.register_external(display_name, contact)

    def claim_public(self, item_id: str, user_id: str) -> dict:
        return self.worklist.claim_public(item_id, user_id)

    def submit_public(self, item_id: str, execution_id: str, payload: object, user_id: str) -> dict:
        return self.worklist.submit_public(item_id, execution_id, payload, user_id)

    def abandon_public(self, item_id: str, execution_id: str, user_id: str) -> dict:
        return self.worklist.abandon_public(item_id, execution_id, user_id)

    def delegate_start(self, instance_id: str, activity_id: str, actor: str, note: str = "") -> dict:
        return self.worklist.delegate_start(instance_id, activity_id, actor, note)

    def delegate_finish(self, instance_id: str, activity_id: str, actor: str, result: object = None) -> dict:
        return self.worklist.delegate_finish(instance_id, activity_id, actor, result)

    def purge_expired_users(self) -> int:
        return self.worklist.purge_expired_users()

    def aggregate_activity(self, instance_id: str, activity_id: str,
                           selection: Optional[list[str]] = None) -> dict:
        self._activity_context(instance_id, activity_id)
        return self.mesam.aggregate(instance_id, activity_id, selection)

    # -- internals -----------------------------------------------------------

    def _activity_context(self, instance_id: str, activity_id: str):
        inst = self.state.instance(instance_id)
        if inst is None:
            raise UnknownInstance(instance_id)
        defn = self.definitions[inst.definition_id]
        adef = defn.activity(activity_id)
        if adef is None:
            raise UnknownActivity(f"{activity_id} not in definition {defn.id}")
        return inst, adef

    def _complete_activity_internal(self, instance_id: str, activity_id: str, result: object) -> dict:
        """Emit the completion with its routing effects precomputed."""
        inst = self.state.instance(instance_id)
        plan = self._plans[inst.definition_id]
        made_available = []
        for succ in plan.successors[activity_id]:
            preds = plan.predecessors[succ]
            done = all(
                p == activity_id or
                inst.activity_instances[p].state == ActivityState.COMPLETED
                for p in preds
            )
            if done and inst.activity_instances[succ].state == ActivityState.INACTIVE:
                made_available.append(succ)
        def _final_state(aid: str) -> ActivityState:
            if aid == activity_id:
                return ActivityState.COMPLETED
            if aid in made_available:
                return ActivityState.AVAILABLE
            return inst.activity_instances[aid].state
        all_done = all(
            _final_state(a.id) == ActivityState.COMPLETED
            for a in self.definitions[inst.definition_id].activities
        )
        instance_state = ProcessState.COMPLETED.value if all_done else ProcessState.RUNNING.value
        self._emit("ActivityCompleted", instance_id, {
            "activity_id": activity_id,
            "result": result,
            "made_available": made_available,
            "instance_state": instance_state,
        })
        self._run_automatic(instance_id)
        return {
            "activity_id": activity_id,
            "made_available": made_available,
            "instance_state": self.state.instance(instance_id).state.value,
        }

    def _fail_activity_internal(self, instance_id: str, activity_id: str, reason: str) -> None:
        """A failed CS activity fails the whole instance: sibling sessions are
        force-closed and everything still pending is skipped."""
        inst = self.state.instance(instance_id)
        defn = self.definitions[inst.definition_id]
        for adef in defn.activities:
            if adef.id == activity_id:
                continue
            session = self.state.session(instance_id, adef.id)
            if session is not None and session.status != SessionStatus.CLOSED:
                self._force_close_session(session)
        skipped = [
            a.id for a in defn.activities
            if a.id != activity_id and inst.activity_instances[a.id].state not in
            (ActivityState.COMPLETED, ActivityState.FAILED, ActivityState.SKIPPED)
        ]
        self._emit("ActivityFailed", instance_id, {
            "activity_id": activity_id,
            "reason": reason,
            "skipped": skipped,
            "instance_state": ProcessState.FAILED.value,
        })

    def _run_automatic(self, instance_id: str) -> None:
        """Drive AUTOMATIC activities: begin and complete each one the moment
        routing makes it AVAILABLE (null result, no application layer)."""
        inst = self.state.instance(instance_id)
        defn = self.definitions[inst.definition_id]
        while True:
            ready = [
                a for a in defn.activities
                if a.kind == TaskKind.AUTOMATIC
                and inst.activity_instances[a.id].state == ActivityState.AVAILABLE
            ]
            if not ready:
                return
            adef = ready[0]
            self._emit("ActivityStarted", instance_id, {
                "activity_id": adef.id,
                "state": ActivityState.ACTIVE.value,
                "assignee": None,
                "actor": "SYSTEM",
                "app_ref": adef.app_ref,
            })
            self._complete_activity_internal(instance_id, adef.id, None)

    def _force_close_session(self, session) -> None:
        for copy_ in session.executions:
            if copy_.state == ExecState.ACTIVE:
                self._emit("ExecutionForceTerminated", session.instance_id, {
                    "activity_id": session.activity_id,
                    "execution_id": copy_.execution_id,
                    "cause": "terminated",
                })
        self._emit("SessionClosed", session.instance_id, {
            "activity_id": session.activity_id,
            "outcome": "TERMINATED",
            "accepted": None,
        })
