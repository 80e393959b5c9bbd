"""MESAM: management of multiple executions of a single activity.

When a crowdsourcing activity opens, a session is created with a deadline.
Any number of external workers may each undertake the task; every claim
spawns an isolated execution copy (its own little state machine). Claims
never close or shrink the session. When the deadline passes, every copy
still ACTIVE is force-terminated, and the session resolves:

* submissions == 0            -> zero-result policy (complete empty, fail,
                                 or extend the deadline and stay open)
* submissions >= min_results  -> COMPLETE, submissions handed to aggregation
* otherwise                   -> FAILED

Claim/submit boundaries are strict: a command at now == deadline is already
too late (the open window is the half-open interval [opened_at, deadline)).
All session mutations run through the engine's serial command stream, so a
claim racing the deadline resolves by command order, never by wall clock.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

from .errors import (
    CapacityReached,
    DuplicateActiveClaim,
    DuplicateSession,
    IllegalExecState,
    IllegalState,
    InvalidSelection,
    SessionClosedError,
    SessionNotClosed,
    UnknownActivity,
    UnknownExecution,
)
from .model import AggregationKind, CsConfig, ZeroResultKind
from .state import CsActivitySession, ExecState, SessionStatus, Submission

if TYPE_CHECKING:
    from .engine import Engine


class MesamManager:
    def __init__(self, engine: "Engine"):
        self.engine = engine

    # -- helpers -----------------------------------------------------------

    def _session(self, instance_id: str, activity_id: str) -> CsActivitySession:
        session = self.engine.state.session(instance_id, activity_id)
        if session is None:
            raise UnknownActivity(f"no session for {instance_id}/{activity_id}")
        return session

    def _config(self, session: CsActivitySession) -> CsConfig:
        inst = self.engine.state.instance(session.instance_id)
        defn = self.engine.definitions[inst.definition_id]
        return defn.activity(session.activity_id).cs_config

    # -- operations --------------------------------------------------------

    def open_session(self, instance_id: str, activity_id: str, cs_config: CsConfig) -> CsActivitySession:
        if self.engine.state.session(instance_id, activity_id) is not None:
            raise DuplicateSession(f"session already open for {instance_id}/{activity_id}")
        now = self.engine.now
        self.engine._emit("SessionOpened", instance_id, {
            "activity_id": activity_id,
            "deadline": now + cs_config.open_duration,
        })
        return self.engine.state.session(instance_id, activity_id)

    def spawn_execution(self, instance_id: str, activity_id: str, worker: str) -> dict:
        session = self._session(instance_id, activity_id)
        now = self.engine.now
        if session.status != SessionStatus.OPEN or now >= session.deadline:
            raise SessionClosedError(f"session {session.key} not open for claims")
        cfg = self._config(session)
        if cfg.max_executions is not None and len(session.executions) >= cfg.max_executions:
            raise CapacityReached(f"session {session.key} reached {cfg.max_executions} executions")
        if session.active_copy_for(worker) is not None:
            raise DuplicateActiveClaim(f"worker {worker} already has an active copy in {session.key}")
        execution_id = f"exec-{self.engine.state.execution_seq + 1:04d}"
        self.engine._emit("ExecutionSpawned", instance_id, {
            "activity_id": activity_id,
            "execution_id": execution_id,
            "worker": worker,
        })
        return session.execution(execution_id).to_doc()

    def submit_result(self, instance_id: str, activity_id: str, execution_id: str, payload: object) -> dict:
        session = self._session(instance_id, activity_id)
        if session.status == SessionStatus.CLOSED:
            raise SessionClosedError(f"session {session.key} is closed; late submission rejected")
        if self.engine.now >= session.deadline:
            # only reachable on a wall clock, between the deadline passing and
            # the ticker firing it; the strict-< window applies regardless
            raise SessionClosedError(f"session {session.key} deadline has passed")
        copy = session.execution(execution_id)
        if copy is None:
            raise UnknownExecution(execution_id)
        if copy.state != ExecState.ACTIVE:
            raise IllegalExecState(f"execution {execution_id} is {copy.state.value}")
        self.engine._emit("ResultSubmitted", instance_id, {
            "activity_id": activity_id,
            "execution_id": execution_id,
            "payload": payload,
        })
        return copy.submission.to_doc()

    def abandon_execution(self, instance_id: str, activity_id: str, execution_id: str) -> dict:
        session = self._session(instance_id, activity_id)
        copy = session.execution(execution_id)
        if copy is None:
            raise UnknownExecution(execution_id)
        if copy.state != ExecState.ACTIVE:
            raise IllegalExecState(f"execution {execution_id} is {copy.state.value}")
        self.engine._emit("ExecutionAbandoned", instance_id, {
            "activity_id": activity_id,
            "execution_id": execution_id,
        })
        return copy.to_doc()

    def on_deadline(self, instance_id: str, activity_id: str) -> dict:
        """Resolve a session whose deadline has passed. Force-terminates every
        ACTIVE copy, then applies the result policy; delivers the outcome to
        the engine, which completes or fails the activity."""
        session = self._session(instance_id, activity_id)
        if session.status != SessionStatus.OPEN:
            raise IllegalState(f"session {session.key} is {session.status.value}")
        now = self.engine.now
        if now < session.deadline:
            raise IllegalState(f"deadline {session.deadline} not reached at {now}")
        cfg = self._config(session)

        for copy in session.executions:
            if copy.state == ExecState.ACTIVE:
                self.engine._emit("ExecutionForceTerminated", instance_id, {
                    "activity_id": activity_id,
                    "execution_id": copy.execution_id,
                    "cause": "deadline",
                })

        submissions = session.completed_submissions()
        if not submissions:
            zero = cfg.on_zero_results
            if zero.kind == ZeroResultKind.EXTEND and session.extensions_used < (zero.max_extensions or 0):
                self.engine._emit("SessionExtended", instance_id, {
                    "activity_id": activity_id,
                    "deadline": session.deadline + zero.span,
                    "extensions_used": session.extensions_used + 1,
                })
                return {"session": session.key, "outcome": "EXTENDED", "deadline": session.deadline}
            if zero.kind == ZeroResultKind.COMPLETE_EMPTY:
                return self._close_complete(session, cfg)
            # FAIL, or EXTEND with extensions exhausted.
            return self._close_failed(session, "zero results")
        if len(submissions) >= cfg.min_results:
            return self._close_complete(session, cfg)
        return self._close_failed(session, f"{len(submissions)} submissions < min_results {cfg.min_results}")

    def _close_complete(self, session: CsActivitySession, cfg: CsConfig) -> dict:
        accepted = self._auto_accepted(session, cfg)
        self.engine._emit("SessionClosed", session.instance_id, {
            "activity_id": session.activity_id,
            "outcome": "COMPLETE",
            "accepted": accepted,
        })
        result = self._result_doc(session)
        self.engine._complete_activity_internal(session.instance_id, session.activity_id, result)
        return {
            "session": session.key,
            "outcome": "COMPLETE",
            "submissions": len(session.completed_submissions()),
        }

    def _close_failed(self, session: CsActivitySession, reason: str) -> dict:
        self.engine._emit("SessionClosed", session.instance_id, {
            "activity_id": session.activity_id,
            "outcome": "FAILED",
            "accepted": None,
        })
        self.engine._fail_activity_internal(session.instance_id, session.activity_id, reason)
        return {"session": session.key, "outcome": "FAILED", "submissions": len(session.completed_submissions())}

    def _auto_accepted(self, session: CsActivitySession, cfg: CsConfig) -> Optional[list[str]]:
        """Accepted execution ids decided at close; OWNER_SELECT stays pending
        (None) until the owner posts a selection."""
        agg = cfg.aggregation
        submissions = session.completed_submissions()
        if agg.kind == AggregationKind.ALL:
            return sorted(s.execution_id for s in submissions)
        if agg.kind == AggregationKind.FIRST_N:
            ordered = sorted(submissions, key=_submission_order)
            return sorted(s.execution_id for s in ordered[: agg.n])
        return None

    def _result_doc(self, session: CsActivitySession) -> dict:
        subs = [c.submission.to_doc() for c in session.executions if c.submission is not None]
        subs.sort(key=lambda d: (d["submitted_at"], d["execution_id"]))
        accepted = sorted(d["execution_id"] for d in subs if d["accepted"])
        has_pending = any(d["accepted"] is None for d in subs)
        return {
            "accepted": None if has_pending else accepted,
            "submissions": subs,
        }

    def aggregate(self, instance_id: str, activity_id: str, selection: Optional[list[str]] = None) -> dict:
        """Compute the accepted set for a CLOSED+COMPLETE session and store it
        as the activity result. Deterministic policies may be re-run; the
        owner's OWNER_SELECT choice is recorded in the log (replay cannot
        derive it)."""
        session = self._session(instance_id, activity_id)
        if session.status != SessionStatus.CLOSED or session.outcome != "COMPLETE":
            raise SessionNotClosed(f"session {session.key} is not closed-complete")
        cfg = self._config(session)
        submissions = session.completed_submissions()
        agg = cfg.aggregation
        if agg.kind == AggregationKind.ALL:
            accepted = sorted(s.execution_id for s in submissions)
        elif agg.kind == AggregationKind.FIRST_N:
            ordered = sorted(submissions, key=_submission_order)
            accepted = sorted(s.execution_id for s in ordered[: agg.n])
        else:  # OWNER_SELECT
            choice = list(selection or [])
            known = {s.execution_id for s in submissions}
            if len(choice) > (agg.k or 0):
                raise InvalidSelection(f"{len(choice)} choices exceed k={agg.k}")
            if len(set(choice)) != len(choice):
                raise InvalidSelection("duplicate execution ids in selection")
            unknown = [c for c in choice if c not in known]
            if unknown:
                raise InvalidSelection(f"unknown execution ids: {', '.join(unknown)}")
            accepted = sorted(choice)
        sub_docs = []
        for copy in session.executions:
            if copy.submission is None:
                continue
            doc = copy.submission.to_doc()
            doc["accepted"] = doc["execution_id"] in accepted
            sub_docs.append(doc)
        sub_docs.sort(key=lambda d: (d["submitted_at"], d["execution_id"]))
        result = {"accepted": accepted, "submissions": sub_docs}
        self.engine._emit("ResultAggregated", instance_id, {
            "activity_id": activity_id,
            "policy": agg.kind.value,
            "accepted": accepted,
            "result": result,
        })
        return result


def _submission_order(sub: Submission) -> tuple[int, str]:
    # Total order for deterministic FIRST_N: earliest first, ties by id.
    return (sub.submitted_at, sub.execution_id)
