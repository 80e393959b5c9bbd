"""The modified worklist handler.

Two audiences: defined internal users get role-scoped work items; undefined
external users get a public board of open crowdsourcing tasks and a
registration desk. A public item stays listed while its session is OPEN -
claims never delist it - and disappears at close.

Also here: the manual delegation mode, where work leaves the system entirely
and the engine records exactly two markers (start, finish); and the
retention purge that anonymizes expired external users while keeping their
ids resolvable from old submissions.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .errors import (
    AuthorizationDenied,
    IllegalState,
    InvalidRegistration,
    UnknownExecution,
    UnknownItem,
    UnknownUser,
)
from .model import TaskKind
from .state import ActivityState, ProcessState, SessionStatus

if TYPE_CHECKING:
    from .engine import Engine


def item_id_for(instance_id: str, activity_id: str) -> str:
    return f"{instance_id}:{activity_id}"


def split_item_id(item_id: str) -> tuple[str, str]:
    if ":" not in item_id:
        raise UnknownItem(item_id)
    instance_id, activity_id = item_id.split(":", 1)
    return instance_id, activity_id


class Worklist:
    def __init__(self, engine: "Engine"):
        self.engine = engine

    # -- listings ------------------------------------------------------------

    def list_for_user(self, user_id: str) -> list[dict]:
        user = self.engine.internal_users.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        items = []
        for item in self._internal_items():
            if item["state"] == ActivityState.AVAILABLE.value:
                role = item["visibility"]["role"]
                if role is None or role in user.roles:
                    items.append(item)
            elif item["state"] == ActivityState.ACTIVE.value:
                # Own claims, plus DELEGATED work which binds no assignee and
                # must stay finishable by any internal user.
                if item["assignee"] == user_id or item["kind"] == TaskKind.DELEGATED.value:
                    items.append(item)
        items.sort(key=lambda d: (d["created_at"], d["item_id"]))
        return items

    def list_public(self) -> list[dict]:
        items = [self._public_item(s) for s in self.engine.state.sessions.values()
                 if s.status == SessionStatus.OPEN]
        items.sort(key=lambda d: (d["created_at"], d["item_id"]))
        return items

    def _internal_items(self) -> list[dict]:
        items = []
        for inst in self.engine.state.instances.values():
            if inst.state != ProcessState.RUNNING:
                continue
            defn = self.engine.definitions[inst.definition_id]
            for adef in defn.activities:
                if adef.kind not in (TaskKind.HUMAN, TaskKind.DELEGATED):
                    continue
                act = inst.activity_instances[adef.id]
                if act.state not in (ActivityState.AVAILABLE, ActivityState.ACTIVE):
                    continue
                items.append({
                    "item_id": item_id_for(inst.id, adef.id),
                    "instance_id": inst.id,
                    "activity_id": adef.id,
                    "kind": adef.kind.value,
                    "visibility": {"scope": "INTERNAL", "role": adef.role},
                    "description": adef.description,
                    "deadline": None,
                    "state": act.state.value,
                    "assignee": act.assignee,
                    "created_at": act.available_at,
                })
        return items

    def _public_item(self, session) -> dict:
        inst = self.engine.state.instance(session.instance_id)
        adef = self.engine.definitions[inst.definition_id].activity(session.activity_id)
        cfg = adef.cs_config
        return {
            "item_id": item_id_for(session.instance_id, session.activity_id),
            "instance_id": session.instance_id,
            "activity_id": session.activity_id,
            "kind": TaskKind.CS.value,
            "visibility": {"scope": "PUBLIC"},
            "description": adef.description,
            "instructions": cfg.instructions,
            "reward": str(cfg.reward),
            "deadline": session.deadline,
            "state": session.status.value,
            "claims": len(session.executions),
            "created_at": session.opened_at,
        }

    # -- external users -------------------------------------------------------

    def register_external(self, display_name: str, contact: str) -> dict:
        if not (display_name or "").strip() or not (contact or "").strip():
            raise InvalidRegistration("display_name and contact must be non-empty")
        user_id = f"u-{self.engine.state.user_seq + 1:04d}"
        self.engine._emit("UserRegistered", None, {
            "user_id": user_id,
            "display_name": display_name,
            "contact": contact,
            "consent_expiry": self.engine.now + self.engine.retention_span,
        })
        doc = self.engine.state.users[user_id].to_doc()
        doc["token"] = user_id  # bearer-token stub: the issued id is the token
        return doc

    def purge_expired_users(self) -> int:
        """Anonymize every external user whose consent expired; ids and
        registration times are retained so old submissions still resolve."""
        now = self.engine.now
        expired = [
            u.user_id for u in self.engine.state.users.values()
            if not u.purged and u.consent_expiry <= now
        ]
        for user_id in sorted(expired):
            self.engine._emit("UserPurged", None, {"user_id": user_id})
        return len(expired)

    # -- public task interaction ------------------------------------------------

    def _session_for_item(self, item_id: str):
        instance_id, activity_id = split_item_id(item_id)
        session = self.engine.state.session(instance_id, activity_id)
        if session is None:
            raise UnknownItem(item_id)
        return session

    def _check_worker(self, user_id: str) -> None:
        user = self.engine.state.users.get(user_id)
        if user is None or user.purged:
            raise UnknownUser(user_id)

    def claim_public(self, item_id: str, user_id: str) -> dict:
        session = self._session_for_item(item_id)
        self._check_worker(user_id)
        return self.engine.mesam.spawn_execution(session.instance_id, session.activity_id, user_id)

    def submit_public(self, item_id: str, execution_id: str, payload: object, user_id: str) -> dict:
        session = self._session_for_item(item_id)
        self._check_worker(user_id)
        if session.status != SessionStatus.CLOSED:
            copy = session.execution(execution_id)
            if copy is None:
                raise UnknownExecution(execution_id)
            if copy.worker != user_id:
                raise AuthorizationDenied(f"execution {execution_id} belongs to another worker")
        return self.engine.mesam.submit_result(session.instance_id, session.activity_id,
                                               execution_id, payload)

    def abandon_public(self, item_id: str, execution_id: str, user_id: str) -> dict:
        session = self._session_for_item(item_id)
        self._check_worker(user_id)
        copy = session.execution(execution_id)
        if copy is None:
            raise UnknownExecution(execution_id)
        if copy.worker != user_id:
            raise AuthorizationDenied(f"execution {execution_id} belongs to another worker")
        return self.engine.mesam.abandon_execution(session.instance_id, session.activity_id,
                                                   execution_id)

    # -- delegation mode --------------------------------------------------------

    def delegate_start(self, instance_id: str, activity_id: str, actor: str, note: str = "") -> dict:
        inst, adef = self.engine._activity_context(instance_id, activity_id)
        if adef.kind != TaskKind.DELEGATED:
            raise IllegalState(f"activity {activity_id} is {adef.kind.value}, not DELEGATED")
        if inst.state != ProcessState.RUNNING:
            raise IllegalState(f"instance {instance_id} is {inst.state.value}")
        act = inst.activity_instances[activity_id]
        if act.state != ActivityState.AVAILABLE:
            raise IllegalState(f"activity {activity_id} is {act.state.value}, not AVAILABLE")
        self.engine._emit("DelegationStarted", instance_id, {
            "activity_id": activity_id,
            "actor": actor,
            "note": note,
        })
        return act.to_doc()

    def delegate_finish(self, instance_id: str, activity_id: str, actor: str, result: object = None) -> dict:
        inst, adef = self.engine._activity_context(instance_id, activity_id)
        if adef.kind != TaskKind.DELEGATED:
            raise IllegalState(f"activity {activity_id} is {adef.kind.value}, not DELEGATED")
        if inst.state != ProcessState.RUNNING:
            raise IllegalState(f"instance {instance_id} is {inst.state.value}")
        act = inst.activity_instances[activity_id]
        if act.state != ActivityState.ACTIVE:
            raise IllegalState(f"activity {activity_id} is {act.state.value}, not ACTIVE")
        self.engine._emit("DelegationFinished", instance_id, {
            "activity_id": activity_id,
            "actor": actor,
        })
        return self.engine._complete_activity_internal(instance_id, activity_id, result)
