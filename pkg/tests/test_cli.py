import json

import pytest

from pdmilp.cli import main
from pdmilp.model import e1, e3, save_instance


@pytest.fixture
def e1_file(tmp_path):
    p = tmp_path / "E1.json"
    save_instance(e1(), p)
    return p


def test_gen_spec_example(tmp_path, capsys):
    out = tmp_path / "inst.json"
    code = main(["gen", "--n", "100", "--s", "10", "--b-range", "-600:-500", "--seed", "1", "-o", str(out)])
    assert code == 0 and out.exists()
    from pdmilp.model import load_instance, validate_instance

    inst = load_instance(out)
    assert (inst.N, inst.S) == (100, 10) and not validate_instance(inst)
    assert all(-600 <= v <= -500 for v in inst.resource)


def test_gen_is_seeded(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        main(["gen", "--n", "4", "--s", "2", "--seed", "7", "-o", str(p), "--quiet"])
    assert a.read_bytes() == b.read_bytes()


def test_check_e1(tmp_path, e1_file, capsys):
    sol = tmp_path / "sol_21.json"
    sol.write_text(json.dumps({"x": [[2], [1]]}))
    assert main(["check", "--instance", str(e1_file), "--solution", str(sol)]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["verdict"] == "feasible" and verdict["cost"] == -3.0


def test_check_infeasible_still_exit_zero(tmp_path, e1_file, capsys):
    sol = tmp_path / "sol.json"
    sol.write_text(json.dumps({"x": [[2], [2]]}))
    assert main(["check", "--instance", str(e1_file), "--solution", str(sol)]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "infeasible"


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["gen"],
    ["run", "--rounds", "x"],
    ["check", "--instance", "missing.json", "--solution", "missing.json"],
    ["gen", "--n", "3", "--b-range", "5:1", "-o", "x.json"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().out == ""


def test_negative_delta_is_usage_error(e1_file, tmp_path):
    assert main(["run", "--instance", str(e1_file), "--delta", "-1", "-o", str(tmp_path)]) == 1


def test_solver_fault_exit_code(tmp_path):
    inst = tmp_path / "i.json"
    main(["gen", "--n", "6", "--s", "2", "--box", "5", "--n-integer", "2", "--cost-range", "-5:0",
          "--b-range", "-30:-10", "--seed", "1", "-o", str(inst), "--quiet"])
    assert main(["solve-central", "--instance", str(inst), "--node-limit", "2",
                 "-o", str(tmp_path / "r.json"), "--quiet"]) == 2


def test_restrict_and_solve_central(tmp_path, capsys):
    inst = tmp_path / "E3.json"
    save_instance(e3(), inst)
    assert main(["restrict", "--instance", str(inst), "-o", str(tmp_path / "r.json")]) == 0
    r = json.loads((tmp_path / "r.json").read_text())
    assert r["sigma_asy"] == 0.0 and r["max_consensus_exact"]
    assert main(["solve-central", "--instance", str(inst), "-o", str(tmp_path / "ref.json")]) == 0
    ref = json.loads((tmp_path / "ref.json").read_text())
    assert ref["J_milp"] == -17.0 and ref["restricted_lp_cost"] == pytest.approx(-17.0)


def test_run_writes_artifacts_and_is_deterministic(tmp_path, e1_file):
    argv = ["run", "--instance", str(e1_file), "--graph", "path", "--rounds", "40", "--M", "10",
            "--alpha0", "0.1", "--bounds", "--quiet"]
    assert main(argv + ["-o", str(tmp_path / "a")]) == 0
    assert main(argv + ["-o", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    doc = json.loads((tmp_path / "a" / "run.json").read_text())
    assert doc["summary"]["feasible_from"] == 0
    assert doc["config"]["M"] == 10.0
    assert doc["bounds"]["J_milp"] == -3.0
    assert doc["final_solution"] is not None


def test_compare_writes_batch(tmp_path, capsys):
    out = tmp_path / "batch.csv"
    assert main(["compare", "--n", "4", "--s", "2", "--count", "3", "--seed", "2", "-o", str(out), "--quiet"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("instance_id,ours_applicable,baseline_applicable")
    assert len(lines) == 4
    assert json.loads(capsys.readouterr().out)["instances"] == 3
