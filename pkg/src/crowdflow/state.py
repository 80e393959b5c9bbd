"""Runtime state and the event fold.

``SystemState`` holds every process instance (the runtime copy of a whole
definition), every crowdsourcing session with its execution copies, and every
registered external user. The ONLY place state mutates is
:func:`apply_event`; engine commands validate against current state, append
events, and apply them. Replaying a log therefore reproduces live state
byte-for-byte under canonical serialization.

State machines:

* process instance: RUNNING -> COMPLETED | FAILED | TERMINATED
* activity:         INACTIVE -> AVAILABLE -> ACTIVE | OPEN -> COMPLETED | FAILED,
                    any non-terminal -> SKIPPED when the instance ends
* execution copy:   ACTIVE -> COMPLETED | ABANDONED | FORCE_TERMINATED
* session:          OPEN -> CLOSING -> CLOSED, CLOSING -> OPEN on extension
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .events import Event


class ProcessState(str, Enum):
    RUNNING = "RUNNING"
    COMPLETED = "COMPLETED"
    FAILED = "FAILED"
    TERMINATED = "TERMINATED"


class ActivityState(str, Enum):
    INACTIVE = "INACTIVE"
    AVAILABLE = "AVAILABLE"
    ACTIVE = "ACTIVE"
    OPEN = "OPEN"
    COMPLETED = "COMPLETED"
    FORCE_TERMINATED = "FORCE_TERMINATED"  # contract parity with ExecState; no activity edge reaches it
    FAILED = "FAILED"
    SKIPPED = "SKIPPED"


class ExecState(str, Enum):
    ACTIVE = "ACTIVE"
    COMPLETED = "COMPLETED"
    ABANDONED = "ABANDONED"
    FORCE_TERMINATED = "FORCE_TERMINATED"


class SessionStatus(str, Enum):
    OPEN = "OPEN"
    CLOSING = "CLOSING"
    CLOSED = "CLOSED"


TERMINAL_ACTIVITY_STATES = frozenset({
    ActivityState.COMPLETED, ActivityState.FAILED, ActivityState.SKIPPED,
    ActivityState.FORCE_TERMINATED,
})

#: Legal activity transitions; the test-suite monitor enforces this table.
ACTIVITY_TRANSITIONS = frozenset({
    (ActivityState.INACTIVE, ActivityState.AVAILABLE),
    (ActivityState.AVAILABLE, ActivityState.ACTIVE),
    (ActivityState.AVAILABLE, ActivityState.OPEN),
    (ActivityState.ACTIVE, ActivityState.COMPLETED),
    (ActivityState.ACTIVE, ActivityState.FAILED),
    (ActivityState.OPEN, ActivityState.COMPLETED),
    (ActivityState.OPEN, ActivityState.FAILED),
    (ActivityState.INACTIVE, ActivityState.SKIPPED),
    (ActivityState.AVAILABLE, ActivityState.SKIPPED),
    (ActivityState.ACTIVE, ActivityState.SKIPPED),
    (ActivityState.OPEN, ActivityState.SKIPPED),
})


@dataclass
class ActivityInstance:
    activity_id: str
    state: ActivityState = ActivityState.INACTIVE
    available_at: Optional[int] = None
    started_at: Optional[int] = None
    finished_at: Optional[int] = None
    assignee: Optional[str] = None
    result: object = None

    def to_doc(self) -> dict:
        return {
            "activity_id": self.activity_id,
            "state": self.state.value,
            "available_at": self.available_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "assignee": self.assignee,
            "result": self.result,
        }


@dataclass
class ProcessInstance:
    id: str
    definition_id: str
    state: ProcessState = ProcessState.RUNNING
    activity_instances: dict[str, ActivityInstance] = field(default_factory=dict)
    data: dict[str, object] = field(default_factory=dict)
    created_at: int = 0
    initiator: Optional[str] = None
    ended_at: Optional[int] = None
    end_reason: Optional[str] = None

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "definition_id": self.definition_id,
            "state": self.state.value,
            "activities": {k: v.to_doc() for k, v in sorted(self.activity_instances.items())},
            "data": {k: self.data[k] for k in sorted(self.data)},
            "created_at": self.created_at,
            "initiator": self.initiator,
            "ended_at": self.ended_at,
            "end_reason": self.end_reason,
        }


@dataclass
class Submission:
    execution_id: str
    payload: object
    submitted_at: int
    accepted: Optional[bool] = None

    def to_doc(self) -> dict:
        return {
            "execution_id": self.execution_id,
            "payload": self.payload,
            "submitted_at": self.submitted_at,
            "accepted": self.accepted,
        }


@dataclass
class ExecutionCopy:
    """One worker's isolated state machine for one CS activity. Copies never
    reference each other."""

    execution_id: str
    worker: str
    state: ExecState = ExecState.ACTIVE
    claimed_at: int = 0
    finished_at: Optional[int] = None
    submission: Optional[Submission] = None

    def to_doc(self) -> dict:
        return {
            "execution_id": self.execution_id,
            "worker": self.worker,
            "state": self.state.value,
            "claimed_at": self.claimed_at,
            "finished_at": self.finished_at,
            "submission": self.submission.to_doc() if self.submission else None,
        }


@dataclass
class CsActivitySession:
    instance_id: str
    activity_id: str
    opened_at: int
    deadline: int
    status: SessionStatus = SessionStatus.OPEN
    executions: list[ExecutionCopy] = field(default_factory=list)
    extensions_used: int = 0
    outcome: Optional[str] = None  # COMPLETE | FAILED | TERMINATED once CLOSED

    @property
    def key(self) -> str:
        return session_key(self.instance_id, self.activity_id)

    def execution(self, execution_id: str) -> Optional[ExecutionCopy]:
        for copy in self.executions:
            if copy.execution_id == execution_id:
                return copy
        return None

    def active_copy_for(self, worker: str) -> Optional[ExecutionCopy]:
        for copy in self.executions:
            if copy.worker == worker and copy.state == ExecState.ACTIVE:
                return copy
        return None

    def completed_submissions(self) -> list[Submission]:
        return [c.submission for c in self.executions if c.state == ExecState.COMPLETED and c.submission]

    def to_doc(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "activity_id": self.activity_id,
            "opened_at": self.opened_at,
            "deadline": self.deadline,
            "status": self.status.value,
            "executions": [c.to_doc() for c in self.executions],
            "extensions_used": self.extensions_used,
            "outcome": self.outcome,
        }


@dataclass
class ExternalUser:
    user_id: str
    display_name: Optional[str]
    contact: Optional[str]
    registered_at: int
    consent_expiry: int
    purged: bool = False

    def to_doc(self) -> dict:
        return {
            "user_id": self.user_id,
            "display_name": self.display_name,
            "contact": self.contact,
            "registered_at": self.registered_at,
            "consent_expiry": self.consent_expiry,
            "purged": self.purged,
        }


def session_key(instance_id: str, activity_id: str) -> str:
    return f"{instance_id}/{activity_id}"


def instance_snapshot(state: "SystemState", instance_id: str) -> Optional[dict]:
    """The public snapshot document for one instance: the instance view plus
    its sessions keyed by activity. Built the same way from live state and
    from replayed state, which is what the replay oracle compares."""
    inst = state.instances.get(instance_id)
    if inst is None:
        return None
    sessions = {
        s.activity_id: s.to_doc()
        for s in state.sessions.values()
        if s.instance_id == instance_id
    }
    return {"instance": inst.to_doc(), "sessions": sessions}


@dataclass
class SystemState:
    instances: dict[str, ProcessInstance] = field(default_factory=dict)
    sessions: dict[str, CsActivitySession] = field(default_factory=dict)
    users: dict[str, ExternalUser] = field(default_factory=dict)
    instance_seq: int = 0
    execution_seq: int = 0
    user_seq: int = 0
    applied_seq: int = 0
    last_at: int = 0

    def instance(self, instance_id: str) -> Optional[ProcessInstance]:
        return self.instances.get(instance_id)

    def session(self, instance_id: str, activity_id: str) -> Optional[CsActivitySession]:
        return self.sessions.get(session_key(instance_id, activity_id))

    def to_doc(self) -> dict:
        return {
            "instances": {k: v.to_doc() for k, v in sorted(self.instances.items())},
            "sessions": {k: v.to_doc() for k, v in sorted(self.sessions.items())},
            "users": {k: v.to_doc() for k, v in sorted(self.users.items())},
            "counters": {
                "instance_seq": self.instance_seq,
                "execution_seq": self.execution_seq,
                "user_seq": self.user_seq,
            },
            "applied_seq": self.applied_seq,
            "last_at": self.last_at,
        }


# --------------------------------------------------------------------------
# The fold. One handler per event kind; deterministic; no clock, no RNG,
# no definition lookups - payloads carry every effect.


def apply_event(state: SystemState, event: Event) -> SystemState:
    handler = _HANDLERS[event.kind]
    handler(state, event)
    state.applied_seq = event.seq
    state.last_at = max(state.last_at, event.at)
    return state


def _on_process_started(state: SystemState, event: Event) -> None:
    p = event.payload
    inst = ProcessInstance(
        id=p["instance_id"],
        definition_id=p["definition_id"],
        created_at=event.at,
        initiator=p.get("initiator"),
    )
    for aid in p["activities"]:
        inst.activity_instances[aid] = ActivityInstance(activity_id=aid)
    for aid in p["available"]:
        act = inst.activity_instances[aid]
        act.state = ActivityState.AVAILABLE
        act.available_at = event.at
    for slot in p.get("data_slots", []):
        inst.data[slot] = None
    state.instances[inst.id] = inst
    state.instance_seq += 1


def _on_activity_started(state: SystemState, event: Event) -> None:
    p = event.payload
    act = state.instances[event.instance_id].activity_instances[p["activity_id"]]
    act.state = ActivityState(p.get("state", "ACTIVE"))
    act.started_at = event.at
    act.assignee = p.get("assignee")


def _on_activity_completed(state: SystemState, event: Event) -> None:
    p = event.payload
    inst = state.instances[event.instance_id]
    act = inst.activity_instances[p["activity_id"]]
    act.state = ActivityState.COMPLETED
    act.finished_at = event.at
    act.result = p.get("result")
    inst.data[p["activity_id"]] = p.get("result")
    for aid in p.get("made_available", []):
        succ = inst.activity_instances[aid]
        succ.state = ActivityState.AVAILABLE
        succ.available_at = event.at
    if p.get("instance_state") == ProcessState.COMPLETED.value:
        inst.state = ProcessState.COMPLETED
        inst.ended_at = event.at


def _on_activity_failed(state: SystemState, event: Event) -> None:
    p = event.payload
    inst = state.instances[event.instance_id]
    act = inst.activity_instances[p["activity_id"]]
    act.state = ActivityState.FAILED
    act.finished_at = event.at
    for aid in p.get("skipped", []):
        inst.activity_instances[aid].state = ActivityState.SKIPPED
    inst.state = ProcessState.FAILED
    inst.ended_at = event.at
    inst.end_reason = p.get("reason")


def _on_session_opened(state: SystemState, event: Event) -> None:
    p = event.payload
    inst = state.instances[event.instance_id]
    act = inst.activity_instances[p["activity_id"]]
    act.state = ActivityState.OPEN
    key = session_key(event.instance_id, p["activity_id"])
    state.sessions[key] = CsActivitySession(
        instance_id=event.instance_id,
        activity_id=p["activity_id"],
        opened_at=event.at,
        deadline=p["deadline"],
    )


def _on_execution_spawned(state: SystemState, event: Event) -> None:
    p = event.payload
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    session.executions.append(ExecutionCopy(
        execution_id=p["execution_id"],
        worker=p["worker"],
        claimed_at=event.at,
    ))
    state.execution_seq += 1


def _on_result_submitted(state: SystemState, event: Event) -> None:
    p = event.payload
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    copy = session.execution(p["execution_id"])
    copy.state = ExecState.COMPLETED
    copy.finished_at = event.at
    copy.submission = Submission(
        execution_id=p["execution_id"],
        payload=p.get("payload"),
        submitted_at=event.at,
    )


def _on_execution_abandoned(state: SystemState, event: Event) -> None:
    p = event.payload
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    copy = session.execution(p["execution_id"])
    copy.state = ExecState.ABANDONED
    copy.finished_at = event.at


def _on_execution_force_terminated(state: SystemState, event: Event) -> None:
    p = event.payload
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    copy = session.execution(p["execution_id"])
    copy.state = ExecState.FORCE_TERMINATED
    copy.finished_at = event.at
    if session.status == SessionStatus.OPEN:
        session.status = SessionStatus.CLOSING


def _on_session_extended(state: SystemState, event: Event) -> None:
    p = event.payload
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    session.deadline = p["deadline"]
    session.extensions_used = p["extensions_used"]
    session.status = SessionStatus.OPEN


def _on_session_closed(state: SystemState, event: Event) -> None:
    p = event.payload
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    session.status = SessionStatus.CLOSED
    session.outcome = p["outcome"]
    accepted = p.get("accepted")
    if accepted is not None:
        accepted_set = set(accepted)
        for copy in session.executions:
            if copy.submission is not None:
                copy.submission.accepted = copy.execution_id in accepted_set


def _on_result_aggregated(state: SystemState, event: Event) -> None:
    p = event.payload
    inst = state.instances[event.instance_id]
    session = state.sessions[session_key(event.instance_id, p["activity_id"])]
    accepted_set = set(p["accepted"])
    for copy in session.executions:
        if copy.submission is not None:
            copy.submission.accepted = copy.execution_id in accepted_set
    inst.data[p["activity_id"]] = p.get("result")
    act = inst.activity_instances[p["activity_id"]]
    act.result = p.get("result")


def _on_delegation_started(state: SystemState, event: Event) -> None:
    p = event.payload
    act = state.instances[event.instance_id].activity_instances[p["activity_id"]]
    act.state = ActivityState.ACTIVE
    act.started_at = event.at


def _on_delegation_finished(state: SystemState, event: Event) -> None:
    # Audit marker; the activity change rides the ActivityCompleted that follows.
    pass


def _on_user_registered(state: SystemState, event: Event) -> None:
    p = event.payload
    state.users[p["user_id"]] = ExternalUser(
        user_id=p["user_id"],
        display_name=p["display_name"],
        contact=p["contact"],
        registered_at=event.at,
        consent_expiry=p["consent_expiry"],
    )
    state.user_seq += 1


def _on_instance_terminated(state: SystemState, event: Event) -> None:
    p = event.payload
    inst = state.instances[event.instance_id]
    for aid in p.get("skipped", []):
        inst.activity_instances[aid].state = ActivityState.SKIPPED
    inst.state = ProcessState.TERMINATED
    inst.ended_at = event.at
    inst.end_reason = p.get("reason")


def _on_user_purged(state: SystemState, event: Event) -> None:
    user = state.users[event.payload["user_id"]]
    user.display_name = None
    user.contact = None
    user.purged = True


_HANDLERS = {
    "ProcessStarted": _on_process_started,
    "ActivityStarted": _on_activity_started,
    "ActivityCompleted": _on_activity_completed,
    "ActivityFailed": _on_activity_failed,
    "SessionOpened": _on_session_opened,
    "ExecutionSpawned": _on_execution_spawned,
    "ResultSubmitted": _on_result_submitted,
    "ExecutionAbandoned": _on_execution_abandoned,
    "ExecutionForceTerminated": _on_execution_force_terminated,
    "SessionExtended": _on_session_extended,
    "SessionClosed": _on_session_closed,
    "ResultAggregated": _on_result_aggregated,
    "DelegationStarted": _on_delegation_started,
    "DelegationFinished": _on_delegation_finished,
    "UserRegistered": _on_user_registered,
    "InstanceTerminated": _on_instance_terminated,
    "UserPurged": _on_user_purged,
}
