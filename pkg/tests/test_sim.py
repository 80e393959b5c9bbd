import json

import pytest

from crowdflow.canonical import canonical_line
from crowdflow.model import (
    ActivityDef,
    CsConfig,
    ProcessDefinition,
    ZeroResultKind,
    ZeroResultPolicy,
    TaskKind,
)
from crowdflow.sim import (
    BOTH,
    EMPLOYER_ONLY,
    WORKER_ONLY,
    SimConfig,
    builtin_definitions,
    generate_population,
    load_sim_config,
    render_csv,
    render_text,
    role_counts,
    run,
)

from conftest import REPO_ROOT


def log_lines(engine):
    return [canonical_line(e.to_doc()) for e in engine.store.events()]


class TestConfig:
    def test_role_mix_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SimConfig(role_mix=(0.5, 0.2, 0.2)).validate()

    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            SimConfig(completion_prob=1.2).validate()
        with pytest.raises(ValueError):
            SimConfig(completion_prob=0.8, abandon_prob=0.3).validate()

    def test_shipped_config_loads(self):
        config, definitions = load_sim_config(REPO_ROOT / "configs" / "sim-small.json")
        assert config.seed == 7
        assert [d.id for d in definitions] == ["crowd-proposals"]


class TestPopulation:
    def test_exact_size_and_default_mix(self):
        population = generate_population(SimConfig(seed=11, population_size=10_000))
        assert len(population) == 10_000
        counts = role_counts(population)
        # within one percent of the documented platform statistics
        assert abs(counts[WORKER_ONLY] - 9_052) <= 9_052 * 0.01
        assert counts[WORKER_ONLY] + counts[EMPLOYER_ONLY] + counts[BOTH] == 10_000

    def test_degenerate_mix_all_workers(self):
        population = generate_population(SimConfig(seed=1, population_size=500,
                                                   role_mix=(1.0, 0.0, 0.0)))
        assert role_counts(population) == {WORKER_ONLY: 500, EMPLOYER_ONLY: 0, BOTH: 0}

    def test_same_seed_identical_population(self):
        a = generate_population(SimConfig(seed=3, population_size=1000))
        b = generate_population(SimConfig(seed=3, population_size=1000))
        assert a == b
        c = generate_population(SimConfig(seed=4, population_size=1000))
        assert a != c

    def test_mix_converges_at_scale_across_seeds(self):
        targets = {WORKER_ONLY: 0.9052, EMPLOYER_ONLY: 0.0359, BOTH: 0.0589}
        for seed in (0, 101, 9001):
            counts = role_counts(generate_population(
                SimConfig(seed=seed, population_size=100_000)))
            for role, target in targets.items():
                assert abs(counts[role] / 100_000 - target) <= 0.005, (seed, role)


class TestRun:
    def test_seed_determinism_of_event_log(self):
        config = SimConfig(seed=21, population_size=200, instances=4, horizon=250)
        _, engine_a = run(config, builtin_definitions())
        _, engine_b = run(config, builtin_definitions())
        assert log_lines(engine_a) == log_lines(engine_b)
        _, engine_c = run(SimConfig(**{**config.__dict__, "seed": 22}), builtin_definitions())
        assert log_lines(engine_a) != log_lines(engine_c)

    def test_completion_prob_zero_means_no_submissions(self):
        config = SimConfig(seed=5, population_size=100, instances=3, horizon=250,
                           completion_prob=0.0, abandon_prob=0.0)
        report, engine = run(config, builtin_definitions())
        assert report.submissions == 0
        assert report.claims > 0
        assert report.force_terminated == report.claims
        # COMPLETE_EMPTY default still completes every instance
        assert report.instances_completed == report.instances_started

    def test_no_claims_complete_empty_everything_completes(self):
        config = SimConfig(seed=5, population_size=50, instances=4, horizon=300, arrival=0.0)
        report, engine = run(config, builtin_definitions())
        assert report.claims == 0
        # one CS activity per instance, 4 instances round-robin over 2 definitions
        assert report.zero_claim_sessions == report.tasks_opened == 4
        assert report.instances_completed == report.instances_started == 4

    def test_no_claims_fail_policy_fails_instances(self):
        cs = CsConfig(open_duration=40,
                      on_zero_results=ZeroResultPolicy(kind=ZeroResultKind.FAIL))
        defn = ProcessDefinition(
            id="must-fill", name="must fill",
            activities=(ActivityDef(id="crowd", kind=TaskKind.CS, cs_config=cs),),
        )
        config = SimConfig(seed=5, population_size=50, instances=3, horizon=200, arrival=0.0)
        report, engine = run(config, [defn])
        assert report.instances_failed == report.instances_started == 3
        for session in engine.state.sessions.values():
            assert session.outcome == "FAILED"

    def test_accounting_identity_recomputed_from_log(self):
        config = SimConfig(seed=9, population_size=300, instances=6, horizon=300)
        report, engine = run(config, builtin_definitions())
        per_session = {}
        for event in engine.store.events():
            if event.kind in ("ExecutionSpawned", "ResultSubmitted",
                              "ExecutionAbandoned", "ExecutionForceTerminated"):
                key = (event.instance_id, event.payload["activity_id"])
                row = per_session.setdefault(key, {"claims": 0, "submissions": 0,
                                                   "abandoned": 0, "forced": 0})
                row[{"ExecutionSpawned": "claims", "ResultSubmitted": "submissions",
                     "ExecutionAbandoned": "abandoned",
                     "ExecutionForceTerminated": "forced"}[event.kind]] += 1
        closed = {(s.instance_id, s.activity_id)
                  for s in engine.state.sessions.values() if s.status.value == "CLOSED"}
        assert closed, "expected closed sessions in this run"
        for key in closed:
            row = per_session.get(key, {"claims": 0, "submissions": 0,
                                        "abandoned": 0, "forced": 0})
            assert row["claims"] == row["submissions"] + row["abandoned"] + row["forced"], key

    def test_thousand_session_ledger_from_event_log(self):
        config = SimConfig(seed=17, population_size=2000, instances=1000,
                           horizon=900, arrival=6.0)
        report, engine = run(config, builtin_definitions())
        assert report.tasks_opened == 1000
        ledger: dict = {}
        for event in engine.store.events():
            if event.kind in ("ExecutionSpawned", "ResultSubmitted",
                              "ExecutionAbandoned", "ExecutionForceTerminated"):
                key = (event.instance_id, event.payload["activity_id"])
                row = ledger.setdefault(key, [0, 0, 0, 0])
                row[("ExecutionSpawned", "ResultSubmitted", "ExecutionAbandoned",
                     "ExecutionForceTerminated").index(event.kind)] += 1
        closed = [s for s in engine.state.sessions.values() if s.status.value == "CLOSED"]
        assert len(closed) == 1000
        for session in closed:
            claims, submissions, abandoned, forced = ledger.get(
                (session.instance_id, session.activity_id), [0, 0, 0, 0])
            assert claims == submissions + abandoned + forced, session.key

    def test_report_matches_engine_state(self):
        config = SimConfig(seed=13, population_size=150, instances=5, horizon=300)
        report, engine = run(config, builtin_definitions())
        assert report.tasks_opened == len(engine.state.sessions)
        assert report.claims == sum(len(s.executions) for s in engine.state.sessions.values())
        assert report.instances_started == len(engine.state.instances)
        assert len(report.sessions) == report.tasks_opened


class TestRendering:
    def test_render_twice_identical(self):
        config = SimConfig(seed=2, population_size=100, instances=3, horizon=200)
        report, _ = run(config, builtin_definitions())
        assert render_text(report) == render_text(report)
        assert render_csv(report) == render_csv(report)

    def test_empty_report_is_header_only(self):
        config = SimConfig(seed=2, population_size=10, instances=0, horizon=50)
        report, _ = run(config, builtin_definitions())
        csv = render_csv(report)
        assert csv == ("session_id,opened_at,deadline,claims,submissions,"
                       "force_terminated,abandoned,outcome\n")

    def test_csv_totals_match_report(self):
        config = SimConfig(seed=31, population_size=200, instances=5, horizon=300)
        report, _ = run(config, builtin_definitions())
        lines = render_csv(report).strip().splitlines()[1:]
        rows = [line.split(",") for line in lines]
        assert sum(int(r[3]) for r in rows) == report.claims
        assert sum(int(r[4]) for r in rows) == report.submissions
        assert sum(int(r[5]) for r in rows) == report.force_terminated
        assert sum(int(r[6]) for r in rows) == report.abandoned
