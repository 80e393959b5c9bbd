"""Event vocabulary and the append-only event record.

Every externally observable state change is recorded as at least one event;
the runtime state is a pure fold over the log (see ``state.apply_event``).
Payloads are self-describing: replay never needs a process definition, only
the log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import UnknownEventKind

EVENT_KINDS = frozenset({
    "ProcessStarted",
    "ActivityStarted",
    "ActivityCompleted",
    "ActivityFailed",
    "SessionOpened",
    "ExecutionSpawned",
    "ResultSubmitted",
    "ExecutionAbandoned",
    "ExecutionForceTerminated",
    "SessionExtended",
    "SessionClosed",
    "ResultAggregated",
    "DelegationStarted",
    "DelegationFinished",
    "UserRegistered",
    "InstanceTerminated",
    "UserPurged",
})


@dataclass(frozen=True)
class Event:
    seq: int
    at: int
    kind: str
    instance_id: Optional[str]
    payload: dict

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "kind": self.kind,
            "instance_id": self.instance_id,
            "payload": self.payload,
        }

    @staticmethod
    def from_doc(doc: dict) -> "Event":
        return Event(
            seq=doc["seq"],
            at=doc["at"],
            kind=doc["kind"],
            instance_id=doc.get("instance_id"),
            payload=doc.get("payload", {}),
        )


def check_kind(kind: str) -> None:
    if kind not in EVENT_KINDS:
        raise UnknownEventKind(f"event kind {kind!r} is not in the vocabulary")
