"""Append-only event log, deterministic replay, and state snapshots.

Log format: one canonical JSON record per line (UTF-8, sorted keys), fields
``seq``/``at``/``kind``/``instance_id``/``payload``. Sequence numbers are
dense from 1; a gap or an undecodable line is a CorruptLog. Snapshots are a
single canonical document carrying a sha256 digest of their body; restore
verifies it and rejects tampering.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Iterable, Optional

from .canonical import canonical_document, canonical_line, digest
from .errors import CorruptLog, CorruptSnapshot, StorageFailure
from .events import Event, check_kind
from .state import (
    ActivityInstance,
    ActivityState,
    CsActivitySession,
    ExecState,
    ExecutionCopy,
    ExternalUser,
    ProcessInstance,
    ProcessState,
    SessionStatus,
    Submission,
    SystemState,
    apply_event,
)


class EventStore:
    """Single-appender log. ``path=None`` keeps the log in memory only."""

    def __init__(self, path: Optional[str | Path] = None):
        self._events: list[Event] = []
        self._path = Path(path) if path is not None else None
        self._fh = None
        if self._path is not None:
            self._open()

    def _open(self) -> None:
        try:
            if self._path.exists():
                self._events = list(read_log(self._path))
            self._fh = open(self._path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot open event log {self._path}: {exc}") from exc

    @property
    def last_seq(self) -> int:
        return self._events[-1].seq if self._events else 0

    def append(self, at: int, kind: str, instance_id: Optional[str], payload: dict) -> Event:
        check_kind(kind)
        event = Event(seq=self.last_seq + 1, at=at, kind=kind, instance_id=instance_id, payload=payload)
        # canonicalize before any mutation: a non-serializable payload must
        # reject the append atomically, file-backed or not
        line = canonical_line(event.to_doc())
        if self._fh is not None:
            try:
                self._fh.write(line + "\n")
                self._fh.flush()
            except OSError as exc:
                raise StorageFailure(f"cannot append to event log: {exc}") from exc
        self._events.append(event)
        return event

    def events(self, from_seq: int = 1, upto_seq: Optional[int] = None) -> list[Event]:
        upto = upto_seq if upto_seq is not None else self.last_seq
        return [e for e in self._events if from_seq <= e.seq <= upto]

    def fork(self) -> "EventStore":
        """In-memory copy sharing the (immutable) event records; used by
        engine cloning during state-space exploration."""
        if self._path is not None:
            raise StorageFailure("cannot fork a file-backed event store")
        other = EventStore()
        other._events = list(self._events)
        return other

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # Context-manager sugar for CLI / gateway shutdown paths.
    def __enter__(self) -> "EventStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_log(path: str | Path) -> Iterable[Event]:
    """Decode a log file, verifying density and vocabulary."""
    events: list[Event] = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                    event = Event.from_doc(doc)
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorruptLog(f"{path}:{lineno}: undecodable event: {exc}") from exc
                try:
                    check_kind(event.kind)
                except Exception as exc:
                    raise CorruptLog(f"{path}:{lineno}: {exc}") from exc
                expected = len(events) + 1
                if event.seq != expected:
                    raise CorruptLog(f"{path}:{lineno}: seq {event.seq}, expected {expected}")
                events.append(event)
    except OSError as exc:
        raise StorageFailure(f"cannot read event log {path}: {exc}") from exc
    return events


def replay(events: Iterable[Event], upto_seq: Optional[int] = None,
           listener: Optional[Callable[[Event, SystemState], None]] = None) -> SystemState:
    """Fold events into a fresh SystemState. Pure and deterministic."""
    state = SystemState()
    for event in events:
        if upto_seq is not None and event.seq > upto_seq:
            break
        expected = state.applied_seq + 1
        if event.seq != expected:
            raise CorruptLog(f"seq gap: got {event.seq}, expected {expected}")
        apply_event(state, event)
        if listener is not None:
            listener(event, state)
    return state


def replay_file(path: str | Path, upto_seq: Optional[int] = None) -> SystemState:
    return replay(read_log(path), upto_seq=upto_seq)


# --------------------------------------------------------------------------
# Snapshots


def snapshot(state: SystemState) -> str:
    """Canonical snapshot document; identical states give identical bytes."""
    body = state.to_doc()
    return canonical_document({"body": body, "digest": digest(body), "format": "crowdflow-snapshot-v1"})


def restore(document: str | bytes) -> SystemState:
    """Inverse of snapshot; digest mismatch or bad shape is CorruptSnapshot."""
    try:
        doc = json.loads(document)
        body = doc["body"]
        claimed = doc["digest"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptSnapshot(f"undecodable snapshot: {exc}") from exc
    if digest(body) != claimed:
        raise CorruptSnapshot("snapshot digest mismatch")
    try:
        return _state_from_doc(body)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"snapshot body malformed: {exc}") from exc


def _state_from_doc(doc: dict) -> SystemState:
    state = SystemState(
        instance_seq=doc["counters"]["instance_seq"],
        execution_seq=doc["counters"]["execution_seq"],
        user_seq=doc["counters"]["user_seq"],
        applied_seq=doc["applied_seq"],
        last_at=doc["last_at"],
    )
    for iid, idoc in doc["instances"].items():
        inst = ProcessInstance(
            id=idoc["id"],
            definition_id=idoc["definition_id"],
            state=ProcessState(idoc["state"]),
            data=dict(idoc["data"]),
            created_at=idoc["created_at"],
            initiator=idoc["initiator"],
            ended_at=idoc["ended_at"],
            end_reason=idoc["end_reason"],
        )
        for aid, adoc in idoc["activities"].items():
            inst.activity_instances[aid] = ActivityInstance(
                activity_id=adoc["activity_id"],
                state=ActivityState(adoc["state"]),
                available_at=adoc["available_at"],
                started_at=adoc["started_at"],
                finished_at=adoc["finished_at"],
                assignee=adoc["assignee"],
                result=adoc["result"],
            )
        state.instances[iid] = inst
    for key, sdoc in doc["sessions"].items():
        session = CsActivitySession(
            instance_id=sdoc["instance_id"],
            activity_id=sdoc["activity_id"],
            opened_at=sdoc["opened_at"],
            deadline=sdoc["deadline"],
            status=SessionStatus(sdoc["status"]),
            extensions_used=sdoc["extensions_used"],
            outcome=sdoc["outcome"],
        )
        for cdoc in sdoc["executions"]:
            sub = None
            if cdoc["submission"] is not None:
                sub = Submission(
                    execution_id=cdoc["submission"]["execution_id"],
                    payload=cdoc["submission"]["payload"],
                    submitted_at=cdoc["submission"]["submitted_at"],
                    accepted=cdoc["submission"]["accepted"],
                )
            session.executions.append(ExecutionCopy(
                execution_id=cdoc["execution_id"],
                worker=cdoc["worker"],
                state=ExecState(cdoc["state"]),
                claimed_at=cdoc["claimed_at"],
                finished_at=cdoc["finished_at"],
                submission=sub,
            ))
        state.sessions[key] = session
    for uid, udoc in doc["users"].items():
        state.users[uid] = ExternalUser(
            user_id=udoc["user_id"],
            display_name=udoc["display_name"],
            contact=udoc["contact"],
            registered_at=udoc["registered_at"],
            consent_expiry=udoc["consent_expiry"],
            purged=udoc["purged"],
        )
    return state


def write_snapshot(state: SystemState, path: str | Path) -> None:
    try:
        Path(path).write_text(snapshot(state), encoding="utf-8")
    except OSError as exc:
        raise StorageFailure(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path: str | Path) -> SystemState:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageFailure(f"cannot read snapshot {path}: {exc}") from exc
    return restore(text)
