"""Process definitions: the validated template a process instance is copied from.

A definition is a connected DAG of activities with exactly one start activity
(no incoming transition) and at least one end activity (no outgoing
transition). Four task kinds exist:

* ``HUMAN``     - claimed and completed by an internal user holding a role
* ``AUTOMATIC`` - runs by itself, references an external application
* ``CS``        - crowdsourcing task, open to any external worker for a
                  bounded span, configured by a :class:`CsConfig`
* ``DELEGATED`` - work leaves the system entirely; the engine records only
                  start and finish

Routing supports sequences plus parallel split (several outgoing transitions)
and AND-join (several incoming). Conditional/XOR routing is out of scope.

The external document format is canonical JSON (see ``definitions/`` in the
repo for reference documents); :func:`parse_definition` and
:func:`serialize_definition` round-trip byte-for-byte on canonical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterable, Optional

from .canonical import canonical_document
from .errors import DefinitionSyntaxError, DefinitionValidationError


class TaskKind(str, Enum):
    HUMAN = "HUMAN"
    AUTOMATIC = "AUTOMATIC"
    CS = "CS"
    DELEGATED = "DELEGATED"


class AggregationKind(str, Enum):
    ALL = "ALL"
    FIRST_N = "FIRST_N"
    OWNER_SELECT = "OWNER_SELECT"


class ZeroResultKind(str, Enum):
    COMPLETE_EMPTY = "COMPLETE_EMPTY"
    FAIL = "FAIL"
    EXTEND = "EXTEND"


@dataclass(frozen=True)
class Aggregation:
    """How submissions are turned into the activity result after close."""

    kind: AggregationKind = AggregationKind.ALL
    n: Optional[int] = None  # FIRST_N only
    k: Optional[int] = None  # OWNER_SELECT only

    def to_doc(self) -> dict:
        doc = {"policy": self.kind.value}
        if self.n is not None:
            doc["n"] = self.n
        if self.k is not None:
            doc["k"] = self.k
        return doc


@dataclass(frozen=True)
class ZeroResultPolicy:
    """What happens when the deadline passes with zero submissions."""

    kind: ZeroResultKind = ZeroResultKind.COMPLETE_EMPTY
    span: Optional[int] = None  # EXTEND only
    max_extensions: Optional[int] = None  # EXTEND only

    def to_doc(self) -> dict:
        doc = {"policy": self.kind.value}
        if self.span is not None:
            doc["span"] = self.span
        if self.max_extensions is not None:
            doc["max_extensions"] = self.max_extensions
        return doc


#: max_executions value meaning "no cap": any number of workers may claim.
UNBOUNDED = None


@dataclass(frozen=True)
class CsConfig:
    open_duration: int = 100
    max_executions: Optional[int] = UNBOUNDED
    min_results: int = 0
    aggregation: Aggregation = Aggregation()
    on_zero_results: ZeroResultPolicy = ZeroResultPolicy()
    instructions: str = ""
    reward: Decimal = Decimal("0")

    def to_doc(self) -> dict:
        return {
            "open_duration": self.open_duration,
            "max_executions": self.max_executions,
            "min_results": self.min_results,
            "aggregation": self.aggregation.to_doc(),
            "on_zero_results": self.on_zero_results.to_doc(),
            "instructions": self.instructions,
            "reward": str(self.reward),
        }


@dataclass(frozen=True)
class RoleDef:
    id: str
    name: str = ""

    def to_doc(self) -> dict:
        return {"id": self.id, "name": self.name}


@dataclass(frozen=True)
class DataSlot:
    name: str
    type: str = "string"

    def to_doc(self) -> dict:
        return {"name": self.name, "type": self.type}


@dataclass(frozen=True)
class Transition:
    from_id: str
    to_id: str
    guard: Optional[str] = None

    def to_doc(self) -> dict:
        return {"from": self.from_id, "to": self.to_id, "guard": self.guard}


@dataclass(frozen=True)
class StartRule:
    """Condition for creating an instance. MANUAL is always satisfied;
    NOT_BEFORE(at) refuses starts while now < at."""

    type: str = "MANUAL"
    at: Optional[int] = None

    def satisfied(self, now: int) -> bool:
        if self.type == "NOT_BEFORE":
            return now >= (self.at or 0)
        return True

    def to_doc(self) -> dict:
        doc = {"type": self.type}
        if self.at is not None:
            doc["at"] = self.at
        return doc


@dataclass(frozen=True)
class EndRule:
    """The process ends when every end activity is terminal."""

    type: str = "ALL_END_ACTIVITIES"

    def to_doc(self) -> dict:
        return {"type": self.type}


@dataclass(frozen=True)
class ActivityDef:
    id: str
    kind: TaskKind
    role: Optional[str] = None  # HUMAN only
    app_ref: Optional[str] = None  # AUTOMATIC only
    cs_config: Optional[CsConfig] = None  # CS only
    description: str = ""

    def to_doc(self) -> dict:
        doc = {"id": self.id, "kind": self.kind.value, "description": self.description}
        if self.role is not None:
            doc["role"] = self.role
        if self.app_ref is not None:
            doc["app_ref"] = self.app_ref
        if self.cs_config is not None:
            doc["cs_config"] = self.cs_config.to_doc()
        return doc


@dataclass(frozen=True)
class ProcessDefinition:
    id: str
    name: str
    start_condition: StartRule = StartRule()
    end_condition: EndRule = EndRule()
    activities: tuple[ActivityDef, ...] = ()
    transitions: tuple[Transition, ...] = ()
    roles: tuple[RoleDef, ...] = ()
    wf_data: tuple[DataSlot, ...] = ()

    def activity(self, activity_id: str) -> Optional[ActivityDef]:
        for a in self.activities:
            if a.id == activity_id:
                return a
        return None

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "start_condition": self.start_condition.to_doc(),
            "end_condition": self.end_condition.to_doc(),
            "activities": [a.to_doc() for a in self.activities],
            "transitions": [t.to_doc() for t in self.transitions],
            "roles": [r.to_doc() for r in self.roles],
            "wf_data": [d.to_doc() for d in self.wf_data],
        }


# --------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    where: str = ""

    def to_doc(self) -> dict:
        return {"code": self.code, "message": self.message, "where": self.where}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def add(self, code: str, message: str, where: str = "") -> None:
        self.violations.append(Violation(code, message, where))


def validate_definition(defn: ProcessDefinition) -> ValidationReport:
    """Check every structural invariant; violations are data, not errors."""
    report = ValidationReport()

    if not defn.id:
        report.add("EMPTY_ID", "definition id must be non-empty")
    if not defn.activities:
        report.add("NO_ACTIVITIES", "definition has no activities")

    ids = [a.id for a in defn.activities]
    seen: set[str] = set()
    for a in defn.activities:
        if a.id in seen:
            report.add("DUPLICATE_ACTIVITY_ID", f"activity id {a.id!r} repeats", a.id)
        seen.add(a.id)

    role_ids = {r.id for r in defn.roles}
    for a in defn.activities:
        _validate_activity(a, role_ids, report)

    known = set(ids)
    edges: set[tuple[str, str]] = set()
    graph_sound = bool(defn.activities)  # structural preconditions for graph checks
    for t in defn.transitions:
        where = f"{t.from_id}->{t.to_id}"
        if t.from_id not in known or t.to_id not in known:
            report.add("UNKNOWN_ACTIVITY", f"transition {where} references an unknown activity", where)
            graph_sound = False
            continue
        if (t.from_id, t.to_id) in edges:
            report.add("DUPLICATE_TRANSITION", f"transition {where} repeats", where)
        edges.add((t.from_id, t.to_id))
    if len(seen) != len(ids):
        graph_sound = False

    if graph_sound:
        _validate_graph(defn, edges, report)

    if defn.start_condition.type not in ("MANUAL", "NOT_BEFORE"):
        report.add("UNKNOWN_START_RULE", f"unknown start rule {defn.start_condition.type!r}")
    if defn.end_condition.type != "ALL_END_ACTIVITIES":
        report.add("UNKNOWN_END_RULE", f"unknown end rule {defn.end_condition.type!r}")

    return report


def _validate_activity(a: ActivityDef, role_ids: set[str], report: ValidationReport) -> None:
    if a.kind == TaskKind.HUMAN:
        if a.role is None:
            report.add("MISSING_ROLE", f"HUMAN activity {a.id!r} has no role", a.id)
        elif a.role not in role_ids:
            report.add("UNKNOWN_ROLE", f"activity {a.id!r} references unknown role {a.role!r}", a.id)
    elif a.role is not None:
        report.add("ROLE_FORBIDDEN", f"{a.kind.value} activity {a.id!r} cannot carry a role", a.id)

    if a.kind == TaskKind.AUTOMATIC:
        if a.app_ref is None:
            report.add("MISSING_APP_REF", f"AUTOMATIC activity {a.id!r} has no app_ref", a.id)
    elif a.app_ref is not None:
        report.add("APP_REF_FORBIDDEN", f"{a.kind.value} activity {a.id!r} cannot carry an app_ref", a.id)

    if a.kind == TaskKind.CS:
        if a.cs_config is None:
            report.add("MISSING_CS_CONFIG", f"CS activity {a.id!r} has no cs_config", a.id)
        else:
            _validate_cs_config(a.id, a.cs_config, report)
    elif a.cs_config is not None:
        report.add("CS_CONFIG_FORBIDDEN", f"{a.kind.value} activity {a.id!r} cannot carry a cs_config", a.id)


def _validate_cs_config(aid: str, cfg: CsConfig, report: ValidationReport) -> None:
    if cfg.open_duration <= 0:
        report.add("DURATION_NONPOSITIVE", f"CS activity {aid!r} open_duration must be > 0", aid)
    if cfg.max_executions is not None and cfg.max_executions <= 0:
        report.add("MAX_EXECUTIONS_NONPOSITIVE", f"CS activity {aid!r} max_executions must be >= 1", aid)
    if cfg.min_results < 0:
        report.add("MIN_RESULTS_NEGATIVE", f"CS activity {aid!r} min_results must be >= 0", aid)
    if cfg.max_executions is not None and cfg.min_results > cfg.max_executions:
        report.add("MIN_RESULTS_EXCEEDS_CAP", f"CS activity {aid!r} min_results exceeds max_executions", aid)
    agg = cfg.aggregation
    if agg.kind == AggregationKind.FIRST_N and (agg.n is None or agg.n < 1):
        report.add("FIRST_N_NONPOSITIVE", f"CS activity {aid!r} FIRST_N needs n >= 1", aid)
    if agg.kind == AggregationKind.OWNER_SELECT and (agg.k is None or agg.k < 1):
        report.add("OWNER_SELECT_NONPOSITIVE", f"CS activity {aid!r} OWNER_SELECT needs k >= 1", aid)
    zero = cfg.on_zero_results
    if zero.kind == ZeroResultKind.EXTEND:
        if zero.span is None or zero.span <= 0:
            report.add("EXTEND_SPAN_NONPOSITIVE", f"CS activity {aid!r} EXTEND needs span > 0", aid)
        if zero.max_extensions is None or zero.max_extensions < 1:
            report.add("EXTEND_COUNT_NONPOSITIVE", f"CS activity {aid!r} EXTEND needs max_extensions >= 1", aid)
    if cfg.reward < 0:
        report.add("NEGATIVE_REWARD", f"CS activity {aid!r} reward must be >= 0", aid)


def _validate_graph(defn: ProcessDefinition, edges: set[tuple[str, str]], report: ValidationReport) -> None:
    ids = [a.id for a in defn.activities]
    indeg = {i: 0 for i in ids}
    outdeg = {i: 0 for i in ids}
    succ: dict[str, list[str]] = {i: [] for i in ids}
    for f, t in sorted(edges):
        indeg[t] += 1
        outdeg[f] += 1
        succ[f].append(t)

    starts = [i for i in ids if indeg[i] == 0]
    if len(starts) > 1:
        report.add("MULTIPLE_START", f"multiple start activities: {', '.join(starts)}")
    if not starts:
        report.add("CYCLE", "no start activity: transition graph contains a cycle")
        return

    # Kahn's algorithm: leftovers mean a cycle.
    pending = dict(indeg)
    queue = sorted(starts)
    visited = 0
    while queue:
        node = queue.pop(0)
        visited += 1
        for nxt in succ[node]:
            pending[nxt] -= 1
            if pending[nxt] == 0:
                queue.append(nxt)
    if visited != len(ids):
        stuck = sorted(i for i in ids if pending[i] > 0)
        report.add("CYCLE", f"cycle detected through: {', '.join(stuck)}")
        return

    # Weak connectivity: one component when edges are undirected.
    if len(ids) > 1:
        neigh: dict[str, set[str]] = {i: set() for i in ids}
        for f, t in edges:
            neigh[f].add(t)
            neigh[t].add(f)
        seen = {starts[0]}
        stack = [starts[0]]
        while stack:
            for n in neigh[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        if len(seen) != len(ids):
            missing = sorted(set(ids) - seen)
            report.add("DISCONNECTED", f"unreachable activities: {', '.join(missing)}")


# --------------------------------------------------------------------------
# Topology


@dataclass(frozen=True)
class ExecutionPlan:
    """Routing view of a valid definition: start node, successor and
    predecessor sets. Joins are AND-joins over the predecessor set."""

    start: str
    successors: dict[str, tuple[str, ...]]
    predecessors: dict[str, tuple[str, ...]]

    @property
    def ends(self) -> tuple[str, ...]:
        return tuple(a for a, succ in sorted(self.successors.items()) if not succ)


def topology(defn: ProcessDefinition) -> ExecutionPlan:
    """Build the execution plan. Caller guarantees the definition is valid."""
    ids = [a.id for a in defn.activities]
    succ: dict[str, list[str]] = {i: [] for i in ids}
    pred: dict[str, list[str]] = {i: [] for i in ids}
    for t in defn.transitions:
        if t.to_id not in succ[t.from_id]:
            succ[t.from_id].append(t.to_id)
            pred[t.to_id].append(t.from_id)
    starts = [i for i in ids if not pred[i]]
    return ExecutionPlan(
        start=starts[0],
        successors={i: tuple(sorted(succ[i])) for i in ids},
        predecessors={i: tuple(sorted(pred[i])) for i in ids},
    )


# --------------------------------------------------------------------------
# Parsing / serialization


def parse_definition(source: str) -> ProcessDefinition:
    """Parse and validate a definition document.

    Raises DefinitionSyntaxError for malformed documents and
    DefinitionValidationError (with rule codes) for structural violations.
    """
    import json

    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise DefinitionSyntaxError(f"not valid JSON: {exc}") from exc
    return parse_definition_doc(doc)


def parse_definition_doc(doc: object) -> ProcessDefinition:
    if not isinstance(doc, dict):
        raise DefinitionSyntaxError("definition document must be an object")
    defn = _build_definition(doc)
    report = validate_definition(defn)
    if not report.ok:
        raise DefinitionValidationError(report.violations)
    return defn


def serialize_definition(defn: ProcessDefinition) -> str:
    """Canonical document form; parse(serialize(d)) == d field-for-field."""
    return canonical_document(defn.to_doc())


def _build_definition(doc: dict) -> ProcessDefinition:
    _expect_keys(doc, "definition", {"id", "name"}, optional={
        "start_condition", "end_condition", "activities", "transitions", "roles", "wf_data",
    })
    return ProcessDefinition(
        id=_string(doc, "id"),
        name=_string(doc, "name"),
        start_condition=_build_start(doc.get("start_condition")),
        end_condition=_build_end(doc.get("end_condition")),
        activities=tuple(_build_activity(a) for a in _array(doc, "activities")),
        transitions=tuple(_build_transition(t) for t in _array(doc, "transitions")),
        roles=tuple(_build_role(r) for r in _array(doc, "roles")),
        wf_data=tuple(_build_slot(s) for s in _array(doc, "wf_data")),
    )


def _build_start(doc: object) -> StartRule:
    if doc is None:
        return StartRule()
    if not isinstance(doc, dict) or "type" not in doc:
        raise DefinitionSyntaxError("start_condition must be an object with a 'type'")
    at = doc.get("at")
    if at is not None and not isinstance(at, int):
        raise DefinitionSyntaxError("start_condition.at must be an integer")
    return StartRule(type=str(doc["type"]), at=at)


def _build_end(doc: object) -> EndRule:
    if doc is None:
        return EndRule()
    if not isinstance(doc, dict) or "type" not in doc:
        raise DefinitionSyntaxError("end_condition must be an object with a 'type'")
    return EndRule(type=str(doc["type"]))


def _build_activity(doc: object) -> ActivityDef:
    if not isinstance(doc, dict):
        raise DefinitionSyntaxError("activity entries must be objects")
    _expect_keys(doc, "activity", {"id", "kind"}, optional={"role", "app_ref", "cs_config", "description"})
    kind_raw = doc.get("kind")
    try:
        kind = TaskKind(kind_raw)
    except ValueError:
        raise DefinitionSyntaxError(f"unknown task kind {kind_raw!r}")
    cs_doc = doc.get("cs_config")
    return ActivityDef(
        id=_string(doc, "id"),
        kind=kind,
        role=_opt_string(doc, "role"),
        app_ref=_opt_string(doc, "app_ref"),
        cs_config=_build_cs_config(cs_doc) if cs_doc is not None else None,
        description=str(doc.get("description", "")),
    )


def _build_cs_config(doc: object) -> CsConfig:
    if not isinstance(doc, dict):
        raise DefinitionSyntaxError("cs_config must be an object")
    _expect_keys(doc, "cs_config", set(), optional={
        "open_duration", "max_executions", "min_results", "aggregation",
        "on_zero_results", "instructions", "reward",
    })
    reward_raw = doc.get("reward", "0")
    try:
        reward = Decimal(str(reward_raw))
    except InvalidOperation:
        raise DefinitionSyntaxError(f"reward {reward_raw!r} is not a decimal")
    return CsConfig(
        open_duration=_int(doc, "open_duration", 100),
        max_executions=_opt_int(doc, "max_executions"),
        min_results=_int(doc, "min_results", 0),
        aggregation=_build_aggregation(doc.get("aggregation")),
        on_zero_results=_build_zero_policy(doc.get("on_zero_results")),
        instructions=str(doc.get("instructions", "")),
        reward=reward,
    )


def _build_aggregation(doc: object) -> Aggregation:
    if doc is None:
        return Aggregation()
    if not isinstance(doc, dict) or "policy" not in doc:
        raise DefinitionSyntaxError("aggregation must be an object with a 'policy'")
    try:
        kind = AggregationKind(doc["policy"])
    except ValueError:
        raise DefinitionSyntaxError(f"unknown aggregation policy {doc['policy']!r}")
    return Aggregation(kind=kind, n=_opt_int(doc, "n"), k=_opt_int(doc, "k"))


def _build_zero_policy(doc: object) -> ZeroResultPolicy:
    if doc is None:
        return ZeroResultPolicy()
    if not isinstance(doc, dict) or "policy" not in doc:
        raise DefinitionSyntaxError("on_zero_results must be an object with a 'policy'")
    try:
        kind = ZeroResultKind(doc["policy"])
    except ValueError:
        raise DefinitionSyntaxError(f"unknown zero-result policy {doc['policy']!r}")
    return ZeroResultPolicy(kind=kind, span=_opt_int(doc, "span"), max_extensions=_opt_int(doc, "max_extensions"))


def _build_transition(doc: object) -> Transition:
    if not isinstance(doc, dict) or "from" not in doc or "to" not in doc:
        raise DefinitionSyntaxError("transitions need 'from' and 'to'")
    guard = doc.get("guard")
    if guard is not None and not isinstance(guard, str):
        raise DefinitionSyntaxError("transition guard must be a string or null")
    return Transition(from_id=str(doc["from"]), to_id=str(doc["to"]), guard=guard)


def _build_role(doc: object) -> RoleDef:
    if not isinstance(doc, dict) or "id" not in doc:
        raise DefinitionSyntaxError("roles need an 'id'")
    return RoleDef(id=str(doc["id"]), name=str(doc.get("name", "")))


def _build_slot(doc: object) -> DataSlot:
    if not isinstance(doc, dict) or "name" not in doc:
        raise DefinitionSyntaxError("wf_data slots need a 'name'")
    return DataSlot(name=str(doc["name"]), type=str(doc.get("type", "string")))


def _expect_keys(doc: dict, what: str, required: set[str], optional: set[str] = frozenset()) -> None:
    missing = required - doc.keys()
    if missing:
        raise DefinitionSyntaxError(f"{what} missing keys: {', '.join(sorted(missing))}")
    unknown = doc.keys() - required - optional
    if unknown:
        raise DefinitionSyntaxError(f"{what} has unknown keys: {', '.join(sorted(unknown))}")


def _array(doc: dict, key: str) -> list:
    val = doc.get(key, [])
    if not isinstance(val, list):
        raise DefinitionSyntaxError(f"{key!r} must be an array")
    return val


def _string(doc: dict, key: str) -> str:
    val = doc.get(key)
    if not isinstance(val, str):
        raise DefinitionSyntaxError(f"{key!r} must be a string")
    return val


def _opt_string(doc: dict, key: str) -> Optional[str]:
    val = doc.get(key)
    if val is None:
        return None
    if not isinstance(val, str):
        raise DefinitionSyntaxError(f"{key!r} must be a string")
    return val


def _int(doc: dict, key: str, default: int) -> int:
    val = doc.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool):
        raise DefinitionSyntaxError(f"{key!r} must be an integer")
    return val


def _opt_int(doc: dict, key: str) -> Optional[int]:
    val = doc.get(key)
    if val is None:
        return None
    if not isinstance(val, int) or isinstance(val, bool):
        raise DefinitionSyntaxError(f"{key!r} must be an integer")
    return val


def sequence_definition(def_id: str, name: str, kinds: Iterable[tuple[str, TaskKind]], **kwargs) -> ProcessDefinition:
    """Convenience builder for linear definitions, used by tests and the sim."""
    acts = []
    roles = set()
    for aid, kind in kinds:
        if kind == TaskKind.HUMAN:
            role = kwargs.get("role", "staff")
            roles.add(role)
            acts.append(ActivityDef(id=aid, kind=kind, role=role))
        elif kind == TaskKind.AUTOMATIC:
            acts.append(ActivityDef(id=aid, kind=kind, app_ref=kwargs.get("app_ref", "app:noop")))
        elif kind == TaskKind.CS:
            acts.append(ActivityDef(id=aid, kind=kind, cs_config=kwargs.get("cs_config", CsConfig())))
        else:
            acts.append(ActivityDef(id=aid, kind=kind))
    transitions = tuple(
        Transition(from_id=acts[i].id, to_id=acts[i + 1].id) for i in range(len(acts) - 1)
    )
    return ProcessDefinition(
        id=def_id,
        name=name,
        activities=tuple(acts),
        transitions=transitions,
        roles=tuple(RoleDef(id=r) for r in sorted(roles)),
    )
