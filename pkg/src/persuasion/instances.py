"""Seeded instance generators and instance/graph file I/O.

All randomness comes from ``numpy.random.Generator(PCG64(seed))`` and is
consumed in a fixed documented order, so identical specs give identical
instances.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import DiscountOutOfRange, InvalidSpec, InvariantViolation, NotIndependent, ParseError
from .model import ActionAdvice, PersuasionMDP


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) < 2 ** 64:
        raise InvalidSpec(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def tune_agent_reward(agent: np.ndarray, principal: np.ndarray, beta: float) -> np.ndarray:
    """Blend the agent's rewards towards (beta > 0) or against (beta < 0) the principal's."""
    return (1.0 - abs(beta)) * agent + beta * principal


def _check_discounts(gamma, gamma_tilde):
    for name, g in (("gamma", gamma), ("gamma_tilde", gamma_tilde)):
        if not 0.0 <= g < 1.0:
            raise InvalidSpec(f"{name} must lie in [0, 1), got {g}")


@dataclass(frozen=True)
class RandomSpec:
    n_states: int = 10
    n_actions: int = 10
    n_thetas: int = 10
    n_terminal: int = 5
    beta: float = 0.0
    gamma: float = 0.8
    gamma_tilde: float = 0.8
    seed: int = 0

    def validate(self):
        if min(self.n_states, self.n_actions, self.n_thetas) < 1:
            raise InvalidSpec("state, action and theta counts must be positive")
        if not 0 <= self.n_terminal < self.n_states:
            raise InvalidSpec(f"terminal count {self.n_terminal} must be in [0, {self.n_states})")
        if not -1.0 <= self.beta <= 1.0:
            raise InvalidSpec(f"beta must lie in [-1, 1], got {self.beta}")
        _check_discounts(self.gamma, self.gamma_tilde)


def _normalized(rng, shape):
    x = rng.random(shape)
    return x / x.sum(axis=-1, keepdims=True)


def gen_random(spec: RandomSpec) -> PersuasionMDP:
    """General random instance.

    Draw order: transitions, initial distribution, principal rewards, agent
    rewards, terminal states, priors. Probabilities are uniform draws
    normalised to sum to one; rewards are uniform on [0, 1].
    """
    spec.validate()
    rng = make_rng(spec.seed)
    S, A, T = spec.n_states, spec.n_actions, spec.n_thetas
    transition = _normalized(rng, (S, A, S))
    init = _normalized(rng, S)
    principal = rng.random((S, T, A))
    agent = rng.random((S, T, A))
    agent = tune_agent_reward(agent, principal, spec.beta)
    terminal = np.zeros(S, dtype=bool)
    terminal[rng.choice(S, size=spec.n_terminal, replace=False)] = True
    prior = _normalized(rng, (S, T))
    return PersuasionMDP(
        state_names=tuple(f"s{i}" for i in range(S)),
        terminal=terminal,
        action_names=tuple(f"a{i}" for i in range(A)),
        theta_names=tuple(f"theta{i}" for i in range(T)),
        available=np.ones((S, A), dtype=bool),
        transition=transition,
        prior=prior,
        principal_reward=principal,
        agent_reward=agent,
        gamma=spec.gamma,
        gamma_tilde=spec.gamma_tilde,
        init_dist=init,
    )


@dataclass(frozen=True)
class RoadNavSpec:
    n_nodes: int = 20
    n_edges: int = 100
    n_thetas: int = 3
    beta: float = 0.5
    gamma: float = 0.8
    gamma_tilde: float = 0.8
    uniform_congestion: bool = False
    seed: int = 0

    def validate(self):
        n, m = self.n_nodes, self.n_edges
        if n < 2:
            raise InvalidSpec("road network needs at least two nodes")
        # n = 2 only admits a single edge, so n - 1 is the effective lower bound
        if not n - 1 <= m <= n * (n - 1) // 2:
            raise InvalidSpec(f"edge count {m} must satisfy n - 1 <= m <= n(n-1)/2 for n = {n}")
        if self.n_thetas < 1:
            raise InvalidSpec("need at least one congestion level")
        if not -1.0 <= self.beta <= 1.0:
            raise InvalidSpec(f"beta must lie in [-1, 1], got {self.beta}")
        _check_discounts(self.gamma, self.gamma_tilde)


def random_dag(n: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random DAG on nodes ``0..n-1`` with edges from lower to higher index.

    A uniform Pruefer sequence gives a spanning tree, whose nodes are
    relabelled in breadth-first order from vertex 0. Random forward edges are
    added until there are at least ``m``, then every non-final node without an
    outgoing edge is linked to node ``n - 1``.
    """
    if n == 2:
        tree = nx.Graph([(0, 1)])
    else:
        tree = nx.from_prufer_sequence([int(x) for x in rng.integers(0, n, size=n - 2)])
    order = {0: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in sorted(tree.neighbors(u)):
            if v not in order:
                order[v] = len(order)
                queue.append(v)
    edges = {tuple(sorted((order[u], order[v]))) for u, v in tree.edges()}
    while len(edges) < m:
        u, v = rng.choice(n, size=2, replace=False)
        edges.add((int(min(u, v)), int(max(u, v))))
    has_out = {u for u, _ in edges}
    for u in range(n - 1):
        if u not in has_out:
            edges.add((u, n - 1))
    return sorted(edges)


def gen_roadnav(spec: RoadNavSpec) -> PersuasionMDP:
    """Road-navigation instance on a random DAG; rewards are negated travel costs.

    Draw order: Pruefer sequence and extra edges, agent costs per (edge,
    theta), principal costs per edge. The agent starts at node 0 and the
    destination ``n - 1`` is terminal. With ``uniform_congestion`` each edge's
    agent costs are sorted so every road ranks congestion levels alike.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    n, T = spec.n_nodes, spec.n_thetas
    edges = random_dag(n, spec.n_edges, rng)
    E = len(edges)
    agent_cost = rng.random((E, T))
    principal_cost = rng.random(E)
    if spec.uniform_congestion:
        agent_cost = np.sort(agent_cost, axis=1)

    available = np.zeros((n, E), dtype=bool)
    transition = np.zeros((n, E, n))
    principal = np.zeros((n, T, E))
    agent = np.zeros((n, T, E))
    for k, (u, v) in enumerate(edges):
        available[u, k] = True
        transition[u, k, v] = 1.0
        principal[u, :, k] = -principal_cost[k]
        agent[u, :, k] = -agent_cost[k]
    agent = tune_agent_reward(agent, principal, spec.beta)
    terminal = np.zeros(n, dtype=bool)
    terminal[n - 1] = True
    init = np.zeros(n)
    init[0] = 1.0
    return PersuasionMDP(
        state_names=tuple(f"n{i}" for i in range(n)),
        terminal=terminal,
        action_names=tuple(f"e{u}_{v}" for u, v in edges),
        theta_names=tuple(f"congestion{t}" for t in range(T)),
        available=available,
        transition=transition,
        prior=np.full((n, T), 1.0 / T),
        principal_reward=principal,
        agent_reward=agent,
        gamma=spec.gamma,
        gamma_tilde=spec.gamma_tilde,
        init_dist=init,
    )


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        clean = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidSpec(f"bad edge ({u}, {v}) for {self.n} vertices")
            e = (min(u, v), max(u, v))
            if e in clean:
                raise InvalidSpec(f"duplicate edge {e}")
            clean.add(e)
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    def neighbors(self, v: int) -> list[int]:
        return sorted({b if a == v else a for a, b in self.edges if v in (a, b)})

    def is_independent(self, nodes) -> bool:
        nodes = set(nodes)
        return not any(u in nodes and v in nodes for u, v in self.edges)

    def independent_sets(self):
        """All independent sets, smallest first (exponential; small graphs only)."""
        for k in range(self.n + 1):
            for combo in itertools.combinations(range(self.n), k):
                if self.is_independent(combo):
                    yield combo

    @classmethod
    def random(cls, n: int, p: float, seed: int) -> "Graph":
        rng = make_rng(seed)
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        return cls(n, tuple(edges))


def read_graph(path) -> Graph:
    """Edge-list file: first line ``n m``, then ``m`` lines ``u v`` (0-based)."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        edges = [(int(a), int(b)) for a, b in lines[1:1 + m]]
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: malformed edge list ({exc})") from exc
    if len(edges) != m:
        raise ParseError(f"{path}: header announces {m} edges, found {len(edges)}")
    return Graph(n, tuple(edges))


@dataclass(frozen=True)
class Gadget:
    mdp: PersuasionMDP
    graph: Graph
    entry: dict  # v -> s_v
    choice: dict  # v -> s'_v
    exit: dict  # v -> s''_v
    sink: int


def gen_indset_gadget(graph: Graph, gamma_tilde: float, gamma: float) -> Gadget:
    """Persuasion instance whose best payoffs encode independent sets of ``graph``.

    Per vertex ``v``: ``s_v`` (start, uniform over vertices) offers ``a`` to the
    sink with agent reward ``gamma_tilde`` and ``b`` to ``s'_v``; at ``s'_v``
    actions ``a``/``b`` lead to ``s''_v`` with agent reward +1 if they match the
    parameter and -1 otherwise; ``s''_v`` offers ``b`` to the sink (agent
    reward ``gamma_tilde**2``, principal reward 1) and, for each neighbour
    ``u``, an action to ``s'_u``.
    """
    if not 0.0 < gamma_tilde < 0.5:
        raise DiscountOutOfRange(f"gadget needs 0 < gamma_tilde < 1/2, got {gamma_tilde}")
    if not 0.0 <= gamma < 1.0:
        raise InvalidSpec(f"gamma must lie in [0, 1), got {gamma}")
    m = graph.n
    if m < 1:
        raise InvalidSpec("graph needs at least one vertex")
    entry = {v: 3 * v for v in range(m)}
    choice = {v: 3 * v + 1 for v in range(m)}
    exit_ = {v: 3 * v + 2 for v in range(m)}
    sink = 3 * m
    S = sink + 1
    actions = ["a", "b"]
    move = {}
    for u, v in graph.edges:
        for x, y in ((u, v), (v, u)):
            move[(x, y)] = len(actions)
            actions.append(f"a_{x}_{y}")
    A = len(actions)
    available = np.zeros((S, A), dtype=bool)
    transition = np.zeros((S, A, S))
    principal = np.zeros((S, 2, A))
    agent = np.zeros((S, 2, A))
    rho = np.array([[1.0, -1.0], [-1.0, 1.0]])  # rho[action, theta]
    for v in range(m):
        s, s1, s2 = entry[v], choice[v], exit_[v]
        available[s, [0, 1]] = True
        transition[s, 0, sink] = 1.0
        transition[s, 1, s1] = 1.0
        agent[s, :, 0] = gamma_tilde
        available[s1, [0, 1]] = True
        transition[s1, 0, s2] = 1.0
        transition[s1, 1, s2] = 1.0
        agent[s1, :, 0] = rho[0]
        agent[s1, :, 1] = rho[1]
        available[s2, 1] = True
        transition[s2, 1, sink] = 1.0
        agent[s2, :, 1] = gamma_tilde ** 2
        principal[s2, :, 1] = 1.0
        for u in graph.neighbors(v):
            k = move[(v, u)]
            available[s2, k] = True
            transition[s2, k, choice[u]] = 1.0
    terminal = np.zeros(S, dtype=bool)
    terminal[sink] = True
    init = np.zeros(S)
    init[[entry[v] for v in range(m)]] = 1.0 / m
    names = []
    for v in range(m):
        names += [f"s_{v}", f"s'_{v}", f"s''_{v}"]
    names.append("s_X")
    mdp = PersuasionMDP(
        state_names=tuple(names),
        terminal=terminal,
        action_names=tuple(actions),
        theta_names=("theta_a", "theta_b"),
        available=available,
        transition=transition,
        prior=np.full((S, 2), 0.5),
        principal_reward=principal,
        agent_reward=agent,
        gamma=gamma,
        gamma_tilde=gamma_tilde,
        init_dist=init,
    )
    return Gadget(mdp, graph, entry, choice, exit_, sink)


def indset_strategy(gadget: Gadget, independent_set) -> ActionAdvice:
    """Full revelation at ``s'_v`` for chosen vertices, no information elsewhere.

    Uninformative states always advise their lowest-indexed available action
    (``a`` at ``s_v`` and ``s'_v``, ``b`` at ``s''_v``).
    """
    chosen = set(int(v) for v in independent_set)
    if not gadget.graph.is_independent(chosen):
        raise NotIndependent(f"{sorted(chosen)} is not an independent set")
    mdp = gadget.mdp
    probs = np.zeros((mdp.n_states, 2, mdp.n_actions))
    for s in range(mdp.n_states):
        if not mdp.terminal[s]:
            probs[s, :, mdp.actions_at(s)[0]] = 1.0
    for v in chosen:
        s = gadget.choice[v]
        probs[s] = 0.0
        probs[s, 0, 0] = 1.0  # theta_a -> a
        probs[s, 1, 1] = 1.0  # theta_b -> b
    return ActionAdvice.from_array(mdp, probs)


def max_independent_set_size(graph: Graph) -> int:
    """Size of a maximum independent set, as a maximum clique of the complement."""
    g = nx.Graph()
    g.add_nodes_from(range(graph.n))
    g.add_edges_from(graph.edges)
    _, weight = nx.max_weight_clique(nx.complement(g), weight=None)
    return int(weight)


def _line_of(text: str, key: str) -> int:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return lineno
    return 1


def three_state_example(gamma: float = 0.5, gamma_tilde: float = 0.5) -> PersuasionMDP:
    """Three-state example: informative advice lures the agent from s0 to s1."""
    # state, parameter, action; actions a, b, c
    agent = np.zeros((3, 2, 3))
    principal = np.zeros((3, 2, 3))
    agent[0, :, 0] = [1.0, -1.0]
    agent[0, :, 1] = [-1.0, 1.0]
    agent[0, :, 2] = 0.1
    principal[0, :, 0] = [1.0, 0.0]
    principal[0, :, 1] = [0.0, 1.0]
    agent[1, :, 1] = 0.1
    principal[1, :, 1] = 10.0
    transition = np.zeros((3, 3, 3))
    transition[0, 0, 1] = transition[0, 1, 1] = transition[0, 2, 2] = 1.0
    transition[1, 0, 0] = transition[1, 1, 2] = 1.0
    available = np.array([[True, True, True], [True, True, False], [False, False, False]])
    return PersuasionMDP(
        state_names=("s0", "s1", "s2"),
        terminal=np.array([False, False, True]),
        action_names=("a", "b", "c"),
        theta_names=("theta_a", "theta_b"),
        available=available,
        transition=transition,
        prior=np.full((3, 2), 0.5),
        principal_reward=principal,
        agent_reward=agent,
        gamma=gamma,
        gamma_tilde=gamma_tilde,
        init_dist=np.array([1.0, 0.0, 0.0]),
    )


def fixture_path(name: str = "three_state.json") -> Path:
    return Path(__file__).parent / "data" / name


def load_instance(path) -> PersuasionMDP:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return PersuasionMDP.from_dict(doc)
    except InvariantViolation as exc:
        key = str(exc).split(":", 1)[0]
        raise InvariantViolation(f"{path}:{_line_of(text, key)}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}:1: malformed instance document ({exc!r})") from exc


def dumps_instance(mdp: PersuasionMDP) -> str:
    doc = mdp.to_dict()
    lines = ["{"]
    items = list(doc.items())
    for k, (key, value) in enumerate(items):
        sep = "," if k < len(items) - 1 else ""
        lines.append(f"  {json.dumps(key)}: {json.dumps(value)}{sep}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_instance(mdp: PersuasionMDP, path) -> None:
    """One top-level field per line, so loader errors can point at a line."""
    Path(path).write_text(dumps_instance(mdp))
