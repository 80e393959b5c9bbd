"""Acceptance suite.

One test per acceptance criterion, each printing a PASS/FAIL line (run with
``pytest tests/test_acceptance.py -s`` to see them live). Tolerances and
bounds are pinned here and nowhere else.
"""

import itertools
import random
import time
from contextlib import contextmanager

from crowdflow.canonical import canonical_line
from crowdflow.errors import CrowdflowError
from crowdflow.eventstore import replay
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
from crowdflow.sim import SimConfig, builtin_definitions, generate_population, role_counts, run
from crowdflow.state import ExecState, SessionStatus

from conftest import GOLDEN_DIR, load_definition, make_engine, state_bytes
from support.driver import reachable_engine_states
from support.enumerator import AbstractModel
from support.random_runs import run_random_commands
from support.scenarios import EngineDriver, run_reference_scenario


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL", flush=True)
        raise
    print(f"ACCEPTANCE {name}: PASS", flush=True)


def test_role_mix_reproduction():
    with criterion("role-mix reproduction (±0.5pp at n=100,000, <10s)"):
        started = time.monotonic()
        population = generate_population(SimConfig(population_size=100_000))
        elapsed = time.monotonic() - started
        counts = role_counts(population)
        total = len(population)
        expected = {"worker_only": 0.9052, "employer_only": 0.0359, "both": 0.0589}
        for role, target in expected.items():
            share = counts[role] / total
            assert abs(share - target) <= 0.005, (role, share, target)
        assert elapsed < 10.0, f"population generation took {elapsed:.2f}s"


def test_reference_scenario_golden_log():
    with criterion("reference scenario golden log (byte-for-byte)"):
        engine = make_engine(load_definition("crowd-proposals"))
        log_of_d_available = []

        def watch(event, _state):
            if event.kind == "SessionClosed":
                log_of_d_available.append(event.payload)

        engine.add_listener(watch)
        run_reference_scenario(EngineDriver(engine))

        snap = engine.query_instance("inst-0001")
        states = {c["execution_id"]: c["state"] for c in snap["sessions"]["C"]["executions"]}
        assert list(states.values()).count("FORCE_TERMINATED") == 1
        session = snap["sessions"]["C"]
        assert session["status"] == "CLOSED" and session["outcome"] == "COMPLETE"
        submissions = [c for c in session["executions"] if c["submission"] is not None]
        assert len(submissions) == 2
        # D was routed AVAILABLE by the session close, then ran to completion
        close_events = [e for e in engine.store.events()
                        if e.kind == "ActivityCompleted" and e.payload["activity_id"] == "C"]
        assert close_events[0].payload["made_available"] == ["D"]
        assert snap["instance"]["state"] == "COMPLETED"

        produced = "\n".join(canonical_line(e.to_doc()) for e in engine.store.events()) + "\n"
        golden = (GOLDEN_DIR / "reference_scenario.log").read_text(encoding="utf-8")
        assert produced == golden


def test_force_termination_safety_randomized():
    with criterion("force-termination safety (1,000 seeded runs, 0 violations)"):
        violations = 0
        closes_seen = 0

        for seed in range(1000):
            zero = list(ZeroResultKind)[seed % 3]
            capacity = (None, 2, 4)[seed % 3]

            checks = []

            def on_event(event, state, checks=checks):
                if event.kind == "SessionClosed":
                    session = state.session(event.instance_id,
                                            event.payload["activity_id"])
                    active = [c for c in session.executions
                              if c.state == ExecState.ACTIVE]
                    checks.append(len(active))

            run_random_commands(seed, steps=35, capacity=capacity, zero=zero,
                                check_spawn_predicate=False, listener=on_event)
            closes_seen += len(checks)
            violations += sum(1 for n in checks if n != 0)

        assert closes_seen >= 500, f"only {closes_seen} session closes observed"
        assert violations == 0


def test_zero_claim_completion_both_policies():
    with criterion("zero-claim completion (COMPLETE_EMPTY completes, FAIL fails)"):
        config = SimConfig(seed=3, population_size=40, instances=5, horizon=220, arrival=0.0)
        report, engine = run(config, builtin_definitions())
        assert report.claims == 0
        assert report.tasks_opened > 0
        assert report.zero_claim_sessions == report.tasks_opened
        assert report.instances_completed == report.instances_started
        for session in engine.state.sessions.values():
            assert session.status == SessionStatus.CLOSED
            assert session.outcome == "COMPLETE"
            assert session.executions == []

        failing = ProcessDefinition(
            id="strict", name="strict",
            activities=(ActivityDef(id="crowd", kind=TaskKind.CS,
                                    cs_config=CsConfig(
                                        open_duration=40,
                                        on_zero_results=ZeroResultPolicy(kind=ZeroResultKind.FAIL))),),
        )
        report, engine = run(config, [failing])
        assert report.instances_failed == report.instances_started > 0
        for inst in engine.state.instances.values():
            assert inst.state.value == "FAILED"
            assert inst.activity_instances["crowd"].state.value == "FAILED"


def test_isolation_under_submission_permutations():
    with criterion("isolation: all k! submission orders identical (k<=4)"):
        def run_order(k, order):
            defn = ProcessDefinition(
                id="iso", name="iso",
                activities=(ActivityDef(id="task", kind=TaskKind.CS,
                                        cs_config=CsConfig(open_duration=90)),),
            )
            engine = make_engine(defn)
            iid = engine.start_instance("iso", initiator="alice")["instance"]["id"]
            engine.begin_activity(iid, "task", "alice")
            workers, copies = [], {}
            engine.advance_clock(to=10)
            for i in range(k):
                uid = engine.register_external(f"w{i}", f"w{i}@crowd.example")["user_id"]
                workers.append(uid)
                copies[uid] = engine.claim_public(f"{iid}:task", uid)["execution_id"]
            engine.advance_clock(to=30)
            for idx in order:
                worker = workers[idx]
                engine.submit_public(f"{iid}:task", copies[worker],
                                     {"author": worker}, worker)
            engine.advance_clock(to=100)
            result = engine.query_instance(iid)["instance"]["data"]["task"]
            multiset = tuple(sorted(canonical_line(s["payload"])
                                    for s in result["submissions"]))
            return multiset, tuple(result["accepted"])

        for k in (1, 2, 3, 4):
            baseline = run_order(k, tuple(range(k)))
            for order in itertools.permutations(range(k)):
                assert run_order(k, order) == baseline, (k, order)


def test_small_instance_oracle_equivalence():
    with criterion("small-instance oracle equivalence (<60s)"):
        started = time.monotonic()
        workers = ("u-0001", "u-0002")

        seq4 = ProcessDefinition(
            id="seq4", name="seq4",
            activities=(
                ActivityDef(id="A", kind=TaskKind.HUMAN, role="staff"),
                ActivityDef(id="B", kind=TaskKind.HUMAN, role="staff"),
                ActivityDef(id="C", kind=TaskKind.CS, cs_config=CsConfig(open_duration=50)),
                ActivityDef(id="D", kind=TaskKind.HUMAN, role="staff"),
            ),
            transitions=(Transition(from_id="A", to_id="B"),
                         Transition(from_id="B", to_id="C"),
                         Transition(from_id="C", to_id="D")),
            roles=(RoleDef(id="staff"),),
        )
        diamond = ProcessDefinition(
            id="dia4", name="dia4",
            activities=tuple(ActivityDef(id=x, kind=TaskKind.HUMAN, role="staff")
                             for x in "ABCD"),
            transitions=(Transition(from_id="A", to_id="B"),
                         Transition(from_id="A", to_id="C"),
                         Transition(from_id="B", to_id="D"),
                         Transition(from_id="C", to_id="D")),
            roles=(RoleDef(id="staff"),),
        )
        cs_strict = ProcessDefinition(
            id="strict1", name="strict1",
            activities=(ActivityDef(id="task", kind=TaskKind.CS,
                                    cs_config=CsConfig(
                                        open_duration=50, min_results=2,
                                        on_zero_results=ZeroResultPolicy(kind=ZeroResultKind.FAIL))),),
        )

        sizes = {}
        for defn in (seq4, diamond, cs_strict):
            engine_states = reachable_engine_states(defn, workers, max_spawns=2)
            oracle_states = AbstractModel(defn, workers, max_spawns=2).reachable()
            assert engine_states == oracle_states, defn.id
            sizes[defn.id] = len(oracle_states)
        assert sizes["seq4"] > 100 and sizes["dia4"] >= 13
        assert time.monotonic() - started < 60.0


def test_replay_determinism_over_simulation_runs():
    with criterion("replay determinism (100 seeded sim runs, byte equality)"):
        definitions = builtin_definitions(open_duration=40)
        for seed in range(100):
            config = SimConfig(seed=seed, population_size=60, instances=2, horizon=120)
            _report, engine = run(config, definitions)
            replayed = replay(engine.store.events())
            assert canonical_line(replayed.to_doc()) == state_bytes(engine), seed


def test_delegation_contract_randomized():
    with criterion("delegation contract (start/finish markers only)"):
        defn = ProcessDefinition(
            id="deleg", name="delegation mix",
            activities=(
                ActivityDef(id="prep", kind=TaskKind.HUMAN, role="staff"),
                ActivityDef(id="outsource", kind=TaskKind.DELEGATED),
                ActivityDef(id="wrap", kind=TaskKind.HUMAN, role="staff"),
            ),
            transitions=(Transition(from_id="prep", to_id="outsource"),
                         Transition(from_id="outsource", to_id="wrap")),
            roles=(RoleDef(id="staff"),),
        )
        completed_runs = 0
        for seed in range(200):
            rng = random.Random(seed)
            engine = make_engine(defn)
            iid = engine.start_instance("deleg", initiator="alice")["instance"]["id"]
            for _ in range(25):
                roll = rng.random()
                try:
                    if roll < 0.2:
                        engine.begin_activity(iid, rng.choice(("prep", "wrap")), "alice")
                    elif roll < 0.4:
                        engine.complete_activity(iid, rng.choice(("prep", "wrap")))
                    elif roll < 0.6:
                        engine.delegate_start(iid, "outsource", "alice",
                                              note=f"note-{seed}")
                    elif roll < 0.8:
                        engine.delegate_finish(iid, "outsource", "alice",
                                               result={"seed": seed})
                    elif roll < 0.9:
                        engine.advance_clock(by=rng.randrange(1, 10))
                    else:
                        engine.complete_activity(iid, "outsource",
                                                 result={"via": "generic-complete"})
                except CrowdflowError:
                    continue
            projected = [e.kind for e in engine.store.events()
                         if e.instance_id == iid
                         and e.payload.get("activity_id") == "outsource"]
            final = engine.state.instance(iid).activity_instances["outsource"].state.value
            if final == "COMPLETED":
                completed_runs += 1
                assert projected == ["DelegationStarted", "DelegationFinished",
                                     "ActivityCompleted"], (seed, projected)
            elif final == "ACTIVE":
                assert projected == ["DelegationStarted"], (seed, projected)
            else:
                assert projected == [], (seed, final, projected)
        assert completed_runs >= 100, completed_runs
