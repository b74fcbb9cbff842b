"""Integration tests for the convlim command line."""
import json
import os
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from convlim.run_convlim import EXIT_BAD_INPUT, EXIT_FAILED, EXIT_OK, main
from tests.conftest import fixture_path, load_fixture_doc


def write_doc(directory, name, doc):
    path = os.path.join(directory, f"{name}.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
    return path


@pytest.mark.integration
class TestVerifyCommand:
    """convlim verify."""

    def test_fixture_a_all_suites(self, capsys, temp_dir):
        report_path = os.path.join(temp_dir, "reports", "a.json")
        code = main(["verify", fixture_path("fixture_a"), "--json", report_path, "--workers", "2"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "[FAIL]" not in out
        assert ", 0 failed in" in out
        with open(report_path, "r", encoding="utf-8") as f:
            report = json.load(f)
        assert report["source"] == "fixture_a.json"
        assert report["suite"] == "all"
        assert all(check["passed"] for check in report["checks"])

    def test_fixture_b_ps(self, capsys):
        assert main(["verify", fixture_path("fixture_b"), "--suite", "ps"]) == EXIT_OK
        assert "ps: ps.theta" in capsys.readouterr().out

    def test_law_breaking_system_fails(self, capsys, temp_dir):
        doc = load_fixture_doc("explicit_xor")
        doc["mult"][0]["table"] = [["a", "c", "x"], ["a", "d", "x"], ["b", "c", "x"], ["b", "d", "x"]]
        path = write_doc(temp_dir, "constant", doc)
        assert main(["verify", path, "--suite", "axioms"]) == EXIT_FAILED
        assert "[FAIL] axioms: system.measure_preserving" in capsys.readouterr().out

    def test_bad_description_exits_2(self, capsys):
        assert main(["verify", fixture_path("bad_weights")]) == EXIT_BAD_INPUT
        err = capsys.readouterr().err
        assert "measures.per_interval[1]" in err
        assert "9/10" in err

    def test_unknown_suite_exits_2(self, capsys):
        assert main(["verify", fixture_path("fixture_a"), "--suite", "nope"]) == EXIT_BAD_INPUT
        assert "unknown suite" in capsys.readouterr().err

    def test_missing_file_exits_2(self, temp_dir):
        assert main(["verify", os.path.join(temp_dir, "absent.json")]) == EXIT_BAD_INPUT

    def test_explicit_schema(self, schema_path):
        assert main(["--schema", schema_path, "verify", fixture_path("z4_uniform"), "--suite", "axioms"]) == EXIT_OK

    def test_missing_schema_exits_2(self, temp_dir):
        code = main(["--schema", os.path.join(temp_dir, "none.json"), "verify", fixture_path("fixture_a")])
        assert code == EXIT_BAD_INPUT

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("CONVLIM_WORKERS", "1")
        assert main(["verify", fixture_path("two_point")]) == EXIT_OK


@pytest.mark.integration
class TestExportCommand:
    """convlim export."""

    def test_koopman_to_file(self, capsys, temp_dir):
        out = os.path.join(temp_dir, "m.json")
        assert main(["export", fixture_path("fixture_a"), "--what", "koopman", "--triple", "0,1,2", "--out", out]) == EXIT_OK
        with open(out, "r", encoding="utf-8") as f:
            doc = json.load(f)
        assert doc["shape"] == [4, 2]
        assert doc["matrix"][3] == ["1", "0"]

    def test_flow_laws_to_stdout(self, capsys):
        assert main(["export", fixture_path("fixture_b"), "--what", "flow-laws"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["what"] == "flow-laws"

    def test_theta_two_point(self, capsys):
        assert main(["export", fixture_path("two_point"), "--what", "theta"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["shape"] == [1, 1]

    def test_invalid_triple_exits_2(self, capsys):
        code = main(["export", fixture_path("fixture_a"), "--what", "koopman", "--triple", "2,1,0"])
        assert code == EXIT_BAD_INPUT
        assert "invalid triple" in capsys.readouterr().err


@pytest.mark.integration
class TestSampleCommand:
    """convlim sample."""

    def test_sample_fixture_a(self, capsys, temp_dir):
        out = os.path.join(temp_dir, "traj", "a.csv")
        assert main(["sample", fixture_path("fixture_a"), "--from", "0", "--to", "3", "-n", "8", "--seed", "1", "--out", out]) == EXIT_OK
        frame = pd.read_csv(out, dtype=str)
        cells = frame[["cell[0,1]", "cell[1,2]", "cell[2,3]"]].astype(int).sum(axis=1) % 2
        assert (cells.astype(str) == frame["X[0,3]"]).all()
        with open(f"{out}.summary.json", "r", encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["n"] == 8
        assert summary["seed"] == 1
        assert "8 threads written" in capsys.readouterr().out

    def test_same_seed_same_file(self, temp_dir):
        paths = [os.path.join(temp_dir, f"{k}.csv") for k in range(2)]
        for path in paths:
            main(["sample", fixture_path("fixture_b"), "--from", "0", "--to", "2", "-n", "40", "--seed", "5", "--out", path])
        with open(paths[0], "r", encoding="utf-8") as f, open(paths[1], "r", encoding="utf-8") as g:
            assert f.read() == g.read()

    def test_zero_draws_exit_2(self, temp_dir):
        out = os.path.join(temp_dir, "none.csv")
        assert main(["sample", fixture_path("fixture_a"), "--from", "0", "--to", "3", "-n", "0", "--out", out]) == EXIT_BAD_INPUT


@pytest.mark.integration
class TestTowerAndMutate:
    """convlim tower and convlim mutate."""

    def test_tower(self, capsys, temp_dir):
        report_path = os.path.join(temp_dir, "tower.json")
        assert main(["tower", fixture_path("fixture_a"), "--json", report_path]) == EXIT_OK
        assert "tower.cylinder[X(0,3) in {0}]" in capsys.readouterr().out
        with open(report_path, "r", encoding="utf-8") as f:
            assert json.load(f)["meta"]["events"] == ["X(0,3) in {0}"]

    def test_mutate_fixture_a(self, capsys, temp_dir):
        csv_path = os.path.join(temp_dir, "mutants.csv")
        assert main(["mutate", fixture_path("fixture_a"), "--csv", csv_path]) == EXIT_OK
        out = capsys.readouterr().out
        assert "[FAIL]" not in out
        table = pd.read_csv(csv_path)
        assert len(table) >= 20
        assert table["detected"].all()
