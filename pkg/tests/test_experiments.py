import numpy as np
import pytest

from persuasion.errors import DegenerateRatio, InvalidSpec
from persuasion.experiments import (
    DAT_HEADER,
    beta_grid,
    evaluate_method,
    benchmark_defaults,
    format_dat,
    payoff_ratio,
    read_dat,
    sweep,
    write_dat,
)

SMALL = {"n_states": 4, "n_actions": 3, "n_thetas": 3, "n_terminal": 1}


def test_toy_methods(toy):
    assert evaluate_method(toy, "full-control").principal == pytest.approx(6.0)
    assert evaluate_method(toy, "nosig-fs").principal == pytest.approx(0.0)
    assert evaluate_method(toy, "optsig-myop").principal == pytest.approx(6.0)
    threat = evaluate_method(toy, "threat").principal
    assert threat == pytest.approx(6.0)
    assert threat == pytest.approx(evaluate_method(toy, "optsig-am").principal, abs=1e-6)


def test_unknown_tag(toy):
    with pytest.raises(ValueError):
        evaluate_method(toy, "optsig-fs")


def test_ratios():
    assert payoff_ratio(2.0, 4.0, cost=False) == 0.5
    assert payoff_ratio(-4.0, -2.0, cost=True) == 0.5
    with pytest.raises(DegenerateRatio):
        payoff_ratio(1.0, 0.0, cost=False)
    with pytest.raises(DegenerateRatio):
        payoff_ratio(1.0, -2.0, cost=True)


def test_beta_grid():
    assert beta_grid() == [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]


def test_sweep_shape_and_bounds():
    rows = sweep("random", "beta", [-1.0, 0.0, 1.0], SMALL, instances_per_point=3, base_seed=5)
    assert [r.x for r in rows] == [-1.0, 0.0, 1.0]
    for row in rows:
        assert np.all(row.stds >= 0)
        ratios = row.ratios
        assert np.all(ratios >= -1e-9) and np.all(ratios <= 1 + 1e-6)
        # signals never hurt: no-signal columns stay below the matching signaling column
        assert np.all(ratios[:, 0] <= ratios[:, 2] + 1e-6)
        assert np.all(ratios[:, 1] <= ratios[:, 3] + 1e-6)


def test_roadnav_sweep_uses_cost_ratios():
    rows = sweep("roadnav", "beta", [0.5], {"n_nodes": 8, "n_edges": 14}, instances_per_point=3)
    assert np.all(rows[0].ratios > 0) and np.all(rows[0].ratios <= 1 + 1e-6)


def test_sweep_validation():
    with pytest.raises(InvalidSpec):
        sweep("random", "beta", [0.0], SMALL, instances_per_point=1)
    with pytest.raises(InvalidSpec):
        sweep("random", "beta", [], SMALL)
    with pytest.raises(InvalidSpec):
        sweep("random", "alpha", [0.0], SMALL)
    with pytest.raises(InvalidSpec):
        sweep("grid", "beta", [0.0], SMALL)


def test_parallel_sweep_is_identical():
    serial = sweep("random", "beta", [0.0, 1.0], SMALL, instances_per_point=2, base_seed=3)
    parallel = sweep("random", "beta", [0.0, 1.0], SMALL, instances_per_point=2, base_seed=3, workers=2)
    assert format_dat(serial) == format_dat(parallel)


def test_dat_round_trip(tmp_path):
    rows = sweep("random", "beta", [0.0], SMALL, instances_per_point=2)
    path = write_dat(rows, tmp_path / "out.dat")
    lines = path.read_text().splitlines()
    assert lines[0] == DAT_HEADER
    assert DAT_HEADER.split("\t")[0] == "x" and len(DAT_HEADER.split("\t")) == 9
    parsed = read_dat(path)
    assert parsed[0]["optSigAM"] == pytest.approx(rows[0].means[3], rel=1e-5)


def test_benchmark_defaults():
    assert benchmark_defaults() == {"n_states": 10, "n_actions": 10, "n_thetas": 10, "n_terminal": 5,
                                  "gamma": 0.8, "gamma_tilde": 0.8}
