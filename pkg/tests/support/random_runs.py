"""Seeded random command soups against the engine.

Used by the property suite and the acceptance criteria: every run carries the
transition monitor, optionally checks the claim predicate against a reference
implementation before every spawn attempt, and returns the engine for
post-hoc assertions (replay equality, session safety, ...).
"""

from __future__ import annotations

import random

from crowdflow import Engine, TransitionMonitor
from crowdflow.errors import (
    CapacityReached,
    CrowdflowError,
    DuplicateActiveClaim,
    SessionClosedError,
)
from crowdflow.model import (
    ActivityDef,
    CsConfig,
    ProcessDefinition,
    RoleDef,
    Transition,
    TaskKind,
    ZeroResultKind,
    ZeroResultPolicy,
)
from crowdflow.state import ExecState, SessionStatus


def crowd_definition(capacity=None, min_results=0, zero=ZeroResultKind.COMPLETE_EMPTY,
                     open_duration=30) -> ProcessDefinition:
    cfg = CsConfig(
        open_duration=open_duration,
        max_executions=capacity,
        min_results=min_results,
        on_zero_results=(ZeroResultPolicy(kind=zero) if zero != ZeroResultKind.EXTEND
                         else ZeroResultPolicy(kind=zero, span=15, max_extensions=2)),
    )
    return ProcessDefinition(
        id="rand-crowd", name="randomized crowd run",
        activities=(
            ActivityDef(id="prep", kind=TaskKind.HUMAN, role="staff"),
            ActivityDef(id="crowd", kind=TaskKind.CS, cs_config=cfg),
            ActivityDef(id="wrap", kind=TaskKind.HUMAN, role="staff"),
        ),
        transitions=(Transition(from_id="prep", to_id="crowd"),
                     Transition(from_id="crowd", to_id="wrap")),
        roles=(RoleDef(id="staff"),),
    )


def reference_spawn_predicate(engine: Engine, instance_id: str, activity_id: str,
                              worker: str, capacity) -> tuple[bool, type | None]:
    """The claim predicate, computed independently from observed state: OPEN
    and before the deadline and under capacity and no duplicate active claim -
    and nothing else may decide a spawn."""
    session = engine.state.session(instance_id, activity_id)
    if session is None:
        return False, None  # caller never tries without a session
    if session.status != SessionStatus.OPEN or engine.now >= session.deadline:
        return False, SessionClosedError
    if capacity is not None and len(session.executions) >= capacity:
        return False, CapacityReached
    if any(c.worker == worker and c.state == ExecState.ACTIVE for c in session.executions):
        return False, DuplicateActiveClaim
    return True, None


def run_random_commands(seed: int, steps: int = 40, capacity=None, min_results=0,
                        zero=ZeroResultKind.COMPLETE_EMPTY, n_workers: int = 3,
                        open_duration: int = 18, check_spawn_predicate: bool = True,
                        listener=None) -> Engine:
    rng = random.Random(seed)
    defn = crowd_definition(capacity=capacity, min_results=min_results, zero=zero,
                            open_duration=open_duration)
    engine = Engine()
    engine.add_listener(TransitionMonitor())
    if listener is not None:
        engine.add_listener(listener)
    engine.add_definition(defn)
    engine.add_internal_user("op", ["staff"])
    workers = [engine.register_external(f"w{i}", f"w{i}@crowd.example")["user_id"]
               for i in range(n_workers)]
    iid = engine.start_instance("rand-crowd", initiator="op")["instance"]["id"]
    # deterministic prefix: get the session OPEN so the random walk spends its
    # budget on the claim/submit/abandon/deadline interleavings that matter
    engine.begin_activity(iid, "prep", "op")
    engine.complete_activity(iid, "prep")
    engine.begin_activity(iid, "crowd", "op")

    for _ in range(steps):
        roll = rng.random()
        try:
            if roll < 0.30:
                worker = rng.choice(workers)
                expected_ok, expected_err = (True, None)
                if check_spawn_predicate:
                    expected_ok, expected_err = reference_spawn_predicate(
                        engine, iid, "crowd", worker, capacity)
                try:
                    engine.mesam.spawn_execution(iid, "crowd", worker)
                    assert expected_ok or not check_spawn_predicate, (
                        f"spawn accepted but predicate said no (seed {seed})")
                except (SessionClosedError, CapacityReached, DuplicateActiveClaim) as exc:
                    if check_spawn_predicate:
                        assert not expected_ok, f"spawn rejected but predicate said yes (seed {seed})"
                        assert isinstance(exc, expected_err), (
                            f"wrong rejection {type(exc).__name__}, wanted "
                            f"{expected_err.__name__} (seed {seed})")
            elif roll < 0.50:
                session = engine.state.session(iid, "crowd")
                if session and session.executions:
                    copy = rng.choice(session.executions)
                    engine.submit_public(f"{iid}:crowd", copy.execution_id,
                                         {"seed": seed}, copy.worker)
            elif roll < 0.62:
                session = engine.state.session(iid, "crowd")
                if session and session.executions:
                    copy = rng.choice(session.executions)
                    engine.abandon_public(f"{iid}:crowd", copy.execution_id, copy.worker)
            elif roll < 0.72:
                engine.begin_activity(iid, "wrap", "op")
            elif roll < 0.82:
                engine.complete_activity(iid, "wrap")
            elif roll < 0.97:
                engine.advance_clock(by=rng.randrange(1, 10))
            else:
                engine.terminate_instance(iid)
        except CrowdflowError:
            continue
    return engine
