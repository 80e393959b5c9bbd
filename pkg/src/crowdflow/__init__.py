"""crowdflow: a workflow enactment service with a crowdsourcing task type.

Process definitions are DAGs of HUMAN, AUTOMATIC, DELEGATED, and CS
(crowdsourcing) activities. A CS activity opens to any external worker for a
bounded span; each claim spawns an isolated execution copy; the deadline
force-terminates stragglers and the collected submissions are aggregated
into the activity result. Everything observable is event-sourced and
deterministically replayable.
"""

from .clock import LogicalClock, WallClock
from .engine import Engine
from .errors import CrowdflowError
from .eventstore import EventStore, replay, replay_file, restore, snapshot
from .model import (
    ActivityDef,
    Aggregation,
    AggregationKind,
    CsConfig,
    ProcessDefinition,
    TaskKind,
    ZeroResultKind,
    ZeroResultPolicy,
    parse_definition,
    serialize_definition,
    topology,
    validate_definition,
)
from .monitors import InvariantViolation, TransitionMonitor

__all__ = [
    "ActivityDef",
    "Aggregation",
    "AggregationKind",
    "CrowdflowError",
    "CsConfig",
    "Engine",
    "EventStore",
    "InvariantViolation",
    "LogicalClock",
    "ProcessDefinition",
    "TaskKind",
    "TransitionMonitor",
    "WallClock",
    "ZeroResultKind",
    "ZeroResultPolicy",
    "parse_definition",
    "replay",
    "replay_file",
    "restore",
    "serialize_definition",
    "snapshot",
    "topology",
    "validate_definition",
]

__version__ = "0.1.0"
