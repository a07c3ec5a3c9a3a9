import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from persuasion.agent import build_meta_mdp, solve_mdp
from persuasion.errors import DiscountOutOfRange, InvalidSpec, InvariantViolation, NotIndependent, ParseError
from persuasion.evaluation import exact_eval
from persuasion.instances import (
    Graph,
    RandomSpec,
    RoadNavSpec,
    dumps_instance,
    fixture_path,
    gen_indset_gadget,
    gen_random,
    gen_roadnav,
    indset_strategy,
    load_instance,
    max_independent_set_size,
    random_dag,
    read_graph,
    save_instance,
    three_state_example,
)
from persuasion.solver import full_control, nosig


# random family

def test_beta_one_copies_principal_rewards():
    mdp = gen_random(RandomSpec(beta=1.0, seed=3))
    assert np.array_equal(mdp.agent_reward, mdp.principal_reward)


def test_beta_minus_one_negates_principal_rewards():
    mdp = gen_random(RandomSpec(beta=-1.0, seed=3))
    assert np.array_equal(mdp.agent_reward, -mdp.principal_reward)


def test_beta_zero_keeps_independent_draw():
    a = gen_random(RandomSpec(beta=0.0, seed=3))
    rng = np.random.Generator(np.random.PCG64(3))
    rng.random((10, 10, 10))
    rng.random(10)
    rng.random((10, 10, 10))
    agent = rng.random((10, 10, 10))
    assert np.array_equal(a.agent_reward[~a.terminal], agent[~a.terminal])


def test_random_instance_shape_and_terminals():
    mdp = gen_random(RandomSpec(n_states=7, n_actions=3, n_thetas=4, n_terminal=2, seed=1))
    assert mdp.transition.shape == (7, 3, 7)
    assert mdp.terminal.sum() == 2


@pytest.mark.parametrize("bad", [
    {"n_terminal": 10}, {"beta": 1.5}, {"gamma": 1.0}, {"gamma_tilde": -0.1}, {"n_actions": 0}, {"seed": -1},
])
def test_random_spec_validation(bad):
    with pytest.raises(InvalidSpec):
        gen_random(RandomSpec(**bad))


@given(st.integers(0, 2 ** 64 - 1))
def test_generation_is_deterministic(seed):
    spec = RandomSpec(n_states=4, n_actions=3, n_thetas=2, n_terminal=1, seed=seed)
    assert dumps_instance(gen_random(spec)) == dumps_instance(gen_random(spec))


# road navigation

def test_two_node_road():
    mdp = gen_roadnav(RoadNavSpec(n_nodes=2, n_edges=1, seed=0))
    assert mdp.n_actions == 1
    assert full_control(mdp).principal_payoff == pytest.approx(nosig(mdp, "fs").principal_payoff)


@given(st.integers(3, 15), st.integers(0, 10_000))
def test_dag_is_acyclic_without_dead_ends(n, seed):
    m = min(n * (n - 1) // 2, n + seed % n)
    edges = random_dag(n, m, np.random.default_rng(seed))
    assert all(u < v for u, v in edges)
    assert len(edges) >= m
    assert {u for u, _ in edges} == set(range(n - 1))


@pytest.mark.parametrize("seed", range(5))
def test_destination_is_reached_surely(seed):
    mdp = gen_roadnav(RoadNavSpec(n_nodes=12, n_edges=30, seed=seed))
    live = ~mdp.terminal
    # worst case over actions: the chance of still travelling after n steps is zero
    stay = np.zeros(mdp.n_states)
    stay[live] = 1.0
    for _ in range(mdp.n_states):
        reach = np.where(mdp.available, mdp.transition @ stay, 0.0).max(axis=1)
        stay = np.where(live, reach, 0.0)
    assert np.all(stay == 0.0)


def test_roadnav_costs_and_congestion():
    mdp = gen_roadnav(RoadNavSpec(n_nodes=8, n_edges=15, beta=0.0, uniform_congestion=True, seed=2))
    assert np.all(mdp.principal_reward <= 0) and np.all(mdp.agent_reward <= 0)
    for s in range(mdp.n_states):
        for a in mdp.actions_at(s):
            assert np.all(np.diff(-mdp.agent_reward[s, :, a]) >= 0)
            assert np.ptp(mdp.principal_reward[s, :, a]) == 0


def test_roadnav_edge_bounds():
    with pytest.raises(InvalidSpec):
        gen_roadnav(RoadNavSpec(n_nodes=5, n_edges=11))


# independent-set gadget

K3 = Graph(3, ((0, 1), (1, 2), (0, 2)))
P3 = Graph(3, ((0, 1), (1, 2)))


def fs_payoff(gadget, nodes):
    advice = indset_strategy(gadget, nodes)
    _, policy = solve_mdp(build_meta_mdp(gadget.mdp, advice))
    return exact_eval(gadget.mdp, advice, policy).principal


@pytest.mark.parametrize("graph, nodes, k", [(K3, (0,), 1), (P3, (0, 2), 2), (Graph(3, ()), (0, 1, 2), 3), (K3, (), 0)])
def test_gadget_payoffs(graph, nodes, k):
    gamma = 0.8
    gadget = gen_indset_gadget(graph, 0.4, gamma)
    assert fs_payoff(gadget, nodes) == pytest.approx(k * gamma ** 2 / 3, abs=1e-9)


def test_edgeless_gadget_has_no_moves():
    gadget = gen_indset_gadget(Graph(3, ()), 0.4, 0.8)
    assert gadget.mdp.action_names == ("a", "b")


def test_gadget_rejects_large_agent_discount():
    with pytest.raises(DiscountOutOfRange):
        gen_indset_gadget(K3, 0.5, 0.8)


def test_indset_strategy_rejects_adjacent_nodes():
    with pytest.raises(NotIndependent):
        indset_strategy(gen_indset_gadget(K3, 0.4, 0.8), (0, 1))


def test_max_independent_set_size():
    assert max_independent_set_size(K3) == 1
    assert max_independent_set_size(P3) == 2
    assert max_independent_set_size(Graph(4, ())) == 4


def test_graph_rejects_bad_edges():
    with pytest.raises(InvalidSpec):
        Graph(3, ((0, 0),))
    with pytest.raises(InvalidSpec):
        Graph(3, ((0, 1), (1, 0)))


def test_read_graph(tmp_path):
    path = tmp_path / "k3.edges"
    path.write_text("3 3\n0 1\n1 2\n0 2\n")
    assert read_graph(path) == K3
    path.write_text("3 3\n0 1\n")
    with pytest.raises(ParseError):
        read_graph(path)


# file I/O

def test_fixture_matches_builder():
    assert load_instance(fixture_path()) == three_state_example()


@given(st.integers(0, 2 ** 32))
def test_save_load_round_trip(seed):
    import tempfile
    from pathlib import Path

    mdp = gen_random(RandomSpec(n_states=4, n_actions=3, n_thetas=2, n_terminal=1, seed=seed))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "inst.json"
        save_instance(mdp, path)
        assert load_instance(path) == mdp


def test_bad_transition_row(tmp_path):
    doc = json.loads(dumps_instance(three_state_example()))
    doc["transition"][0][0] = [0.0, 0.9, 0.0]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InvariantViolation, match="transition"):
        load_instance(path)


def test_truncated_file(tmp_path):
    text = dumps_instance(three_state_example())
    path = tmp_path / "cut.json"
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ParseError, match="cut.json"):
        load_instance(path)


def test_missing_key(tmp_path):
    doc = json.loads(dumps_instance(three_state_example()))
    del doc["prior"]
    path = tmp_path / "missing.json"
    path.write_text(json.dumps(doc))
    with pytest.raises((ParseError, InvariantViolation)):
        load_instance(path)
