import json
import subprocess
import sys

import pytest

from persuasion.cli import main
from persuasion.experiments import DAT_HEADER
from persuasion.instances import fixture_path, load_instance

TOY = str(fixture_path())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("method, expected", [("myop", "6.000000"), ("nosig-fs", "0.000000"),
                                              ("full-control", "6.000000")])
def test_solve_prints_payoff(capsys, tmp_path, method, expected):
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "solve", TOY, "--method", method, "-o", str(report))
    assert code == 0
    assert out.strip() == expected
    assert json.loads(report.read_text())["method"] == method


def test_threat_and_am_agree(capsys, tmp_path):
    payoffs = []
    for method in ("threat", "am"):
        report = tmp_path / f"{method}.json"
        assert run(capsys, "solve", TOY, "--method", method, "-o", str(report))[0] == 0
        payoffs.append(json.loads(report.read_text())["principal_payoff"])
    assert payoffs[0] == pytest.approx(payoffs[1], abs=1e-6)


def test_generate_random(capsys, tmp_path):
    out = tmp_path / "inst.json"
    code, text, _ = run(capsys, "generate", "random", "--states", "10", "--actions", "10", "--thetas", "10",
                        "--terminals", "5", "--beta", "0", "--seed", "7", "-o", str(out))
    assert code == 0
    assert "seed=7" in text
    assert load_instance(out).n_states == 10


def test_generate_roadnav(capsys, tmp_path):
    out = tmp_path / "road.json"
    code, _, _ = run(capsys, "generate", "roadnav", "--nodes", "20", "--edges", "100", "--thetas", "3",
                     "--seed", "1", "-o", str(out))
    assert code == 0
    assert load_instance(out).n_states == 20


def test_generate_indset(capsys, tmp_path):
    graph = tmp_path / "k3.edges"
    graph.write_text("3 3\n0 1\n1 2\n0 2\n")
    out = tmp_path / "k3.json"
    code, _, _ = run(capsys, "generate", "indset", "--graph", str(graph), "--gamma-tilde", "0.4", "-o", str(out))
    assert code == 0
    mapping = json.loads((tmp_path / "k3.mapping.json").read_text())
    assert mapping["entry"] == {"0": 0, "1": 3, "2": 6}


def test_evaluate(capsys, tmp_path):
    code, out, _ = run(capsys, "evaluate", TOY, "--method", "threat")
    assert code == 0 and "principal 6.000000" in out
    code, out, _ = run(capsys, "evaluate", TOY, "--method", "optsig-myop", "--rollout", "--samples", "500")
    assert code == 0 and out.startswith("principal")


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["solve", TOY, "--method", "bogus"])
    assert exc.value.code == 2
    graph = tmp_path / "k3.edges"
    graph.write_text("3 3\n0 1\n1 2\n0 2\n")
    assert run(capsys, "generate", "indset", "--graph", str(graph), "--gamma-tilde", "0.6",
               "-o", str(tmp_path / "x.json"))[0] == 2
    assert run(capsys, "evaluate", TOY, "--method", "full-control", "--rollout")[0] == 2
    assert run(capsys, "experiment", "--set", "colour=red", "-o", str(tmp_path / "x.dat"))[0] == 2


def test_io_errors(capsys, tmp_path):
    assert run(capsys, "solve", str(tmp_path / "missing.json"), "--method", "myop")[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "solve", str(bad), "--method", "myop")[0] == 3


def test_experiment_is_parallelism_independent(capsys, tmp_path, monkeypatch):
    args = ["experiment", "--grid", "0", "1", "--instances", "2", "--seed", "4",
            "--set", "n_states=4", "--set", "n_actions=3", "--set", "n_thetas=2", "--set", "n_terminal=1"]
    one, many = tmp_path / "one.dat", tmp_path / "many.dat"
    assert run(capsys, *args, "--workers", "1", "-o", str(one))[0] == 0
    monkeypatch.setenv("PERSUASION_THREADS", "2")
    assert run(capsys, *args, "-o", str(many))[0] == 0
    assert one.read_bytes() == many.read_bytes()
    lines = one.read_text().splitlines()
    assert lines[0] == DAT_HEADER and len(lines) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "persuasion", "solve", TOY, "--method", "nosig-fs",
                           "-o", "/dev/null"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.000000"
