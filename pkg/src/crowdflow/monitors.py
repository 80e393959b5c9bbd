"""Runtime invariant monitors.

Attached as engine listeners (the simulator always runs with them on; the
test suite attaches them to most engines). After every applied event they
re-check the touched instance against the legal transition tables and the
session bookkeeping rules, raising InvariantViolation on any breach.
"""

from __future__ import annotations

from .events import Event
from .state import (
    ACTIVITY_TRANSITIONS,
    ActivityState,
    ExecState,
    SessionStatus,
    SystemState,
)

EXEC_TRANSITIONS = frozenset({
    (ExecState.ACTIVE, ExecState.COMPLETED),
    (ExecState.ACTIVE, ExecState.ABANDONED),
    (ExecState.ACTIVE, ExecState.FORCE_TERMINATED),
})

SESSION_TRANSITIONS = frozenset({
    (SessionStatus.OPEN, SessionStatus.CLOSING),
    (SessionStatus.OPEN, SessionStatus.CLOSED),
    (SessionStatus.CLOSING, SessionStatus.CLOSED),
    (SessionStatus.CLOSING, SessionStatus.OPEN),  # extension re-opens
})


class InvariantViolation(AssertionError):
    pass


class TransitionMonitor:
    """Checks that no activity, execution copy, or session ever moves outside
    its legal transition table, that execution counts and deadlines are
    monotone, and that a CLOSED session holds no ACTIVE copies."""

    def __init__(self):
        self._activity: dict[tuple[str, str], ActivityState] = {}
        self._exec: dict[str, ExecState] = {}
        self._session: dict[str, SessionStatus] = {}
        self._exec_count: dict[str, int] = {}
        self._deadline: dict[str, int] = {}
        self.events_seen = 0

    def __call__(self, event: Event, state: SystemState) -> None:
        self.events_seen += 1
        if event.instance_id is not None and event.instance_id in state.instances:
            self._check_instance(event, state)
        self._check_sessions(event, state)

    def _check_instance(self, event: Event, state: SystemState) -> None:
        inst = state.instances[event.instance_id]
        for aid, act in inst.activity_instances.items():
            key = (inst.id, aid)
            prev = self._activity.get(key, ActivityState.INACTIVE)
            if act.state != prev:
                if (prev, act.state) not in ACTIVITY_TRANSITIONS:
                    raise InvariantViolation(
                        f"illegal activity transition {prev.value} -> {act.state.value} "
                        f"for {inst.id}/{aid} at event {event.seq} ({event.kind})")
                self._activity[key] = act.state

    def _check_sessions(self, event: Event, state: SystemState) -> None:
        for key, session in state.sessions.items():
            if event.instance_id is not None and session.instance_id != event.instance_id:
                continue
            prev_status = self._session.get(key, SessionStatus.OPEN)
            if session.status != prev_status:
                if (prev_status, session.status) not in SESSION_TRANSITIONS:
                    raise InvariantViolation(
                        f"illegal session transition {prev_status.value} -> "
                        f"{session.status.value} for {key} at event {event.seq}")
                self._session[key] = session.status

            count = len(session.executions)
            if count < self._exec_count.get(key, 0):
                raise InvariantViolation(f"execution count shrank for {key}")
            self._exec_count[key] = count

            if session.deadline < self._deadline.get(key, session.deadline):
                raise InvariantViolation(f"deadline moved backwards for {key}")
            self._deadline[key] = session.deadline

            for copy in session.executions:
                prev = self._exec.get(copy.execution_id, ExecState.ACTIVE)
                if copy.state != prev:
                    if (prev, copy.state) not in EXEC_TRANSITIONS:
                        raise InvariantViolation(
                            f"illegal execution transition {prev.value} -> {copy.state.value} "
                            f"for {copy.execution_id} at event {event.seq}")
                    self._exec[copy.execution_id] = copy.state
                if (copy.submission is not None) != (copy.state == ExecState.COMPLETED):
                    raise InvariantViolation(
                        f"submission presence does not match state for {copy.execution_id}")

            if session.status == SessionStatus.CLOSED:
                active = [c.execution_id for c in session.executions if c.state == ExecState.ACTIVE]
                if active:
                    raise InvariantViolation(
                        f"closed session {key} still has ACTIVE copies: {active}")
