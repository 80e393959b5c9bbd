import json

import pytest

from crowdflow.cli import main

from conftest import DEFINITIONS_DIR, REPO_ROOT, make_engine
from support.scenarios import EngineDriver, run_reference_scenario


class TestValidate:
    def test_valid_reference_document(self, capsys):
        assert main(["validate", str(DEFINITIONS_DIR / "business-cards.json")]) == 0
        out = capsys.readouterr().out
        assert "OK: business-cards" in out
        assert "3 activities" in out

    def test_cyclic_definition_prints_rule_code(self, tmp_path, capsys):
        doc = json.loads((DEFINITIONS_DIR / "crowd-proposals.json").read_text())
        doc["transitions"].append({"from": "D", "to": "A"})
        path = tmp_path / "cyclic.json"
        path.write_text(json.dumps(doc))
        assert main(["validate", str(path)]) == 1
        err = capsys.readouterr().err
        assert "CYCLE" in err

    def test_missing_file(self, capsys):
        assert main(["validate", "no/such/file.json"]) == 1

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["validate"])
        assert err.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2


class TestReplay:
    def test_replay_summary(self, tmp_path, capsys, proposals_def):
        engine = make_engine(proposals_def)
        run_reference_scenario(EngineDriver(engine))
        from crowdflow.canonical import canonical_line

        log = tmp_path / "events.log"
        log.write_text("\n".join(canonical_line(e.to_doc())
                                 for e in engine.store.events()) + "\n")
        assert main(["replay", "--log", str(log)]) == 0
        out = capsys.readouterr().out
        assert "events applied:  20" in out
        assert "instances:       1" in out
        assert "external users:  3" in out

    def test_corrupt_log_exits_1(self, tmp_path, capsys):
        log = tmp_path / "bad.log"
        log.write_text("garbage\n")
        assert main(["replay", "--log", str(log)]) == 1
        assert "CORRUPT_LOG" in capsys.readouterr().err


class TestSimulate:
    def test_seed_7_twice_is_byte_identical(self, capsys):
        assert main(["simulate", "--seed", "7"]) == 0
        first = capsys.readouterr().out
        assert main(["simulate", "--seed", "7"]) == 0
        second = capsys.readouterr().out
        assert first == second
        assert "empirical role mix" in first

    def test_different_seed_differs(self, capsys):
        main(["simulate", "--seed", "7"])
        first = capsys.readouterr().out
        main(["simulate", "--seed", "8"])
        second = capsys.readouterr().out
        assert first != second

    def test_config_file_with_csv_output(self, tmp_path, capsys):
        csv_path = tmp_path / "report.csv"
        assert main(["simulate", "--config", str(REPO_ROOT / "configs" / "sim-small.json"),
                     "--csv", str(csv_path)]) == 0
        out = capsys.readouterr().out
        assert "sessions opened:" in out
        header = csv_path.read_text().splitlines()[0]
        assert header == ("session_id,opened_at,deadline,claims,submissions,"
                          "force_terminated,abandoned,outcome")
