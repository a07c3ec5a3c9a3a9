"""Agent side: meta-MDPs induced by committed strategies and best responses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .config import TOL
from .errors import NonConvergence, SingularSystem
from .model import (
    ActionAdvice,
    GeneralSignaling,
    PersuasionMDP,
    ThreatStrategy,
    uninformative,
)

TERMINAL_SIGNAL = -1
"""Signal slot of the single meta-state kept for each terminal state."""


@dataclass(frozen=True, eq=False)
class MetaMDP:
    """The agent's decision problem over ``(state, signal)`` pairs.

    Terminal meta-states have no available action and value 0. For every
    other meta-state and available action, ``transition[i, a]`` is a
    distribution over meta-states.
    """

    meta_states: tuple[tuple[int, int], ...]
    available: np.ndarray  # (M, A)
    transition: np.ndarray  # (M, A, M)
    agent_reward: np.ndarray  # (M, A), posterior-expected
    principal_reward: np.ndarray  # (M, A), posterior-expected
    signal_prob: np.ndarray  # (M,), probability of the signal given the state
    advised: np.ndarray  # (M,), advised action or -1
    terminal: np.ndarray  # (M,)
    init: np.ndarray  # (M,)
    discount: float

    def __post_init__(self):
        object.__setattr__(self, "_index", {m: i for i, m in enumerate(self.meta_states)})

    @property
    def size(self) -> int:
        return len(self.meta_states)

    def index(self, meta_state: tuple[int, int]) -> int:
        return self._index[meta_state]

    def __contains__(self, meta_state) -> bool:
        return meta_state in self._index


@dataclass(frozen=True)
class AgentPolicy:
    """Deterministic agent policy keyed by meta-state ``(s, g)``."""

    actions: Mapping[tuple[int, int], int]

    def __getitem__(self, meta_state: tuple[int, int]) -> int:
        return self.actions[meta_state]

    def get(self, meta_state, default=None):
        return self.actions.get(meta_state, default)

    def __contains__(self, meta_state) -> bool:
        return meta_state in self.actions

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.actions)

    def items(self):
        return self.actions.items()


@dataclass(frozen=True, eq=False)
class ValueFunction:
    meta_states: tuple[tuple[int, int], ...]
    values: np.ndarray
    iterations: int = 0
    policy_iterations: int = 0

    def __getitem__(self, meta_state: tuple[int, int]) -> float:
        return float(self.values[self.meta_states.index(meta_state)])

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {m: float(v) for m, v in zip(self.meta_states, self.values)}


def _entry_matrix(mdp: PersuasionMDP, index: dict, signal_prob: np.ndarray | None, fixed: int | None) -> np.ndarray:
    """``E[s', i]``: probability of landing in meta-state ``i`` when the state moves to ``s'``."""
    E = np.zeros((mdp.n_states, len(index)))
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            E[s, index[(s, TERMINAL_SIGNAL)]] = 1.0
        elif fixed is not None:
            E[s, index[(s, fixed)]] = 1.0
        else:
            for g in np.flatnonzero(signal_prob[s] > 0):
                E[s, index[(s, int(g))]] = signal_prob[s, g]
    return E


def _posterior_rewards(mdp, strategy, metas, q):
    M = len(metas)
    r_agent = np.zeros((M, mdp.n_actions))
    r_principal = np.zeros((M, mdp.n_actions))
    for i, (s, g) in enumerate(metas):
        if g == TERMINAL_SIGNAL:
            continue
        if strategy is None:
            belief = mdp.prior[s]
        else:
            belief = mdp.prior[s] * strategy.probs[s, :, g] / q[s, g]
        r_agent[i] = belief @ mdp.agent_reward[s]
        r_principal[i] = belief @ mdp.principal_reward[s]
    return r_agent, r_principal


def build_meta_mdp(mdp: PersuasionMDP, strategy: GeneralSignaling) -> MetaMDP:
    """Agent MDP under a Markovian strategy; never-sent signals are dropped."""
    strategy.validate(mdp)
    q = strategy.signal_marginals(mdp)
    metas = []
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            metas.append((s, TERMINAL_SIGNAL))
        else:
            metas.extend((s, int(g)) for g in np.flatnonzero(q[s] > 0))
    index = {m: i for i, m in enumerate(metas)}
    E = _entry_matrix(mdp, index, q, None)
    states = np.array([s for s, _ in metas])
    terminal = np.array([g == TERMINAL_SIGNAL for _, g in metas])
    transition = mdp.transition[states] @ E
    r_agent, r_principal = _posterior_rewards(mdp, strategy, metas, q)
    advised = np.array([
        -1 if t or strategy.advised_action(g) is None else strategy.advised_action(g)
        for (_, g), t in zip(metas, terminal)
    ])
    return MetaMDP(
        meta_states=tuple(metas),
        available=mdp.available[states] & ~terminal[:, None],
        transition=transition,
        agent_reward=r_agent,
        principal_reward=r_principal,
        signal_prob=np.array([1.0 if t else q[s, g] for (s, g), t in zip(metas, terminal)]),
        advised=advised,
        terminal=terminal,
        init=mdp.init_dist @ E,
        discount=mdp.gamma_tilde,
    )


def build_threat_meta_mdp(mdp: PersuasionMDP, threat: ThreatStrategy) -> MetaMDP:
    """Agent MDP under the threat strategy.

    Advised meta-states ``(s, a)`` follow the base advice while the agent
    obeys; any other action sends the next state to the silent layer
    ``(s', n_actions)``, which is closed and behaves like no signaling.
    """
    base = threat.base
    base.validate(mdp)
    silent = threat.silent_signal
    q = base.signal_marginals(mdp)
    metas = []
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            metas.append((s, TERMINAL_SIGNAL))
        else:
            metas.extend((s, int(g)) for g in np.flatnonzero(q[s] > 0))
            metas.append((s, silent))
    index = {m: i for i, m in enumerate(metas)}
    E_advice = _entry_matrix(mdp, index, q, None)
    E_silent = _entry_matrix(mdp, index, None, silent)

    M, A = len(metas), mdp.n_actions
    transition = np.zeros((M, A, M))
    r_agent = np.zeros((M, A))
    r_principal = np.zeros((M, A))
    advised = np.full(M, -1)
    signal_prob = np.ones(M)
    terminal = np.zeros(M, dtype=bool)
    for i, (s, g) in enumerate(metas):
        if g == TERMINAL_SIGNAL:
            terminal[i] = True
            continue
        if g == silent:
            belief = mdp.prior[s]
            transition[i] = mdp.transition[s] @ E_silent
        else:
            belief = mdp.prior[s] * base.probs[s, :, g] / q[s, g]
            transition[i] = mdp.transition[s] @ E_silent
            transition[i, g] = mdp.transition[s, g] @ E_advice
            advised[i] = g
            signal_prob[i] = q[s, g]
        r_agent[i] = belief @ mdp.agent_reward[s]
        r_principal[i] = belief @ mdp.principal_reward[s]
    states = np.array([s for s, _ in metas])
    return MetaMDP(
        meta_states=tuple(metas),
        available=mdp.available[states] & ~terminal[:, None],
        transition=transition,
        agent_reward=r_agent,
        principal_reward=r_principal,
        signal_prob=signal_prob,
        advised=advised,
        terminal=terminal,
        init=mdp.init_dist @ E_advice,
        discount=mdp.gamma_tilde,
    )


def q_values(meta: MetaMDP, values: np.ndarray, reward: np.ndarray | None = None) -> np.ndarray:
    reward = meta.agent_reward if reward is None else reward
    Q = reward + meta.discount * (meta.transition @ values)
    return np.where(meta.available, Q, -np.inf)


def _greedy(meta: MetaMDP, Q: np.ndarray, tie: float) -> np.ndarray:
    """Greedy actions; the advised action wins any tie, then the lowest index.

    Ties are judged on the probability-weighted scale ``q(s, g) * gap`` used by
    the incentive checks.
    """
    policy = np.full(meta.size, -1)
    live = np.flatnonzero(~meta.terminal)
    best = Q[live].max(axis=1)
    for k, i in enumerate(live):
        weight = meta.signal_prob[i]
        a = meta.advised[i]
        if a >= 0 and meta.available[i, a] and weight * (best[k] - Q[i, a]) <= tie:
            policy[i] = a
        else:
            policy[i] = int(np.flatnonzero(weight * (best[k] - Q[i]) <= tie)[0])
    return policy


def policy_values(meta: MetaMDP, policy: np.ndarray, reward: np.ndarray, discount: float) -> np.ndarray:
    """Exact values of a deterministic policy (array over meta-states)."""
    live = np.flatnonzero(~meta.terminal)
    acts = policy[live]
    T = meta.transition[live, acts][:, live]
    r = reward[live, acts]
    values = np.zeros(meta.size)
    if live.size:
        try:
            values[live] = np.linalg.solve(np.eye(live.size) - discount * T, r)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    return values


def iteration_budget(discount: float, r_max: float, eps: float = TOL.value_iteration,
                     cap: int = TOL.max_iterations) -> int:
    if discount <= 0.0:
        return 1
    r_max = max(r_max, eps)
    n = 10.0 * math.log(eps * (1.0 - discount) / r_max) / math.log(discount)
    return int(min(cap, max(1, math.ceil(n))))


def solve_mdp(meta: MetaMDP, tie: float = TOL.tie, eps: float = TOL.value_iteration,
              max_iterations: int | None = None) -> tuple[ValueFunction, AgentPolicy]:
    """Optimal values and a tie-broken greedy policy for a meta-MDP.

    Value iteration runs until the sup-norm error bound drops below ``eps``;
    the greedy policy is then evaluated exactly and improved until stable, so
    the returned values are those of the returned policy.
    """
    gamma = meta.discount
    r_max = float(np.abs(meta.agent_reward).max()) if meta.size else 0.0
    budget = max_iterations or iteration_budget(gamma, r_max, eps)
    V = np.zeros(meta.size)
    threshold = eps * (1.0 - gamma) / gamma if gamma > 0 else math.inf
    iterations = 0
    converged = False
    while iterations < budget:
        iterations += 1
        Q = q_values(meta, V)
        V_new = np.zeros_like(V)
        live = ~meta.terminal
        V_new[live] = Q[live].max(axis=1)
        delta = float(np.abs(V_new - V).max()) if V.size else 0.0
        V = V_new
        if delta <= threshold:
            converged = True
            break
    if not converged:
        raise NonConvergence(f"value iteration did not converge in {budget} iterations")

    policy = _greedy(meta, q_values(meta, V), tie)
    polish = 0
    for polish in range(1, 101):
        V = policy_values(meta, policy, meta.agent_reward, gamma)
        improved = _greedy(meta, q_values(meta, V), tie)
        if np.array_equal(improved, policy):
            break
        policy = improved
    actions = {m: int(a) for m, a, t in zip(meta.meta_states, policy, meta.terminal) if not t}
    return (
        ValueFunction(meta.meta_states, V, iterations=iterations, policy_iterations=polish),
        AgentPolicy(actions),
    )


def policy_array(meta: MetaMDP, policy: AgentPolicy) -> np.ndarray:
    out = np.full(meta.size, -1)
    for i, m in enumerate(meta.meta_states):
        if not meta.terminal[i] and m in policy:
            out[i] = policy[m]
    return out


def reachable(meta: MetaMDP, policy: np.ndarray) -> np.ndarray:
    """Meta-states reached with positive probability from ``init`` under ``policy``."""
    seen = meta.init > 0
    frontier = list(np.flatnonzero(seen))
    while frontier:
        i = frontier.pop()
        if meta.terminal[i] or policy[i] < 0:
            continue
        for j in np.flatnonzero(meta.transition[i, policy[i]] > 0):
            if not seen[j]:
                seen[j] = True
                frontier.append(j)
    return seen


def disobeyed_meta_states(meta: MetaMDP, policy: AgentPolicy) -> list[tuple[int, int]]:
    """Reachable advised meta-states where ``policy`` does not take the advised action."""
    arr = policy_array(meta, policy)
    reach = reachable(meta, arr)
    return [
        meta.meta_states[i]
        for i in np.flatnonzero(reach & (meta.advised >= 0))
        if arr[i] != meta.advised[i]
    ]


def bellman_residual(meta: MetaMDP, values: ValueFunction, policy: AgentPolicy) -> float:
    """Sup-norm gap of the Bellman optimality equation and of the policy's own equation."""
    V = values.values
    Q = q_values(meta, V)
    live = np.flatnonzero(~meta.terminal)
    if not live.size:
        return 0.0
    opt = np.abs(Q[live].max(axis=1) - V[live]).max()
    arr = policy_array(meta, policy)
    own = np.abs(Q[live, arr[live]] - V[live]).max()
    return float(max(opt, own))


def myopic_response(mdp: PersuasionMDP, strategy: GeneralSignaling, reward: np.ndarray | None = None,
                    tie: float = TOL.tie) -> AgentPolicy:
    """Per-signal best action for the immediate posterior-expected reward.

    The advised action is kept whenever its probability-weighted shortfall is
    within ``tie``, mirroring :func:`persuasion.model.is_ic`.
    """
    reward = mdp.agent_reward if reward is None else np.asarray(reward, dtype=float)
    q = strategy.signal_marginals(mdp)
    actions = {}
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            continue
        for g in np.flatnonzero(q[s] > 0):
            g = int(g)
            weighted = (mdp.prior[s] * strategy.probs[s, :, g]) @ reward[s]
            weighted = np.where(mdp.available[s], weighted, -np.inf)
            best = weighted.max()
            a = strategy.advised_action(g)
            if a is not None and mdp.available[s, a] and best - weighted[a] <= tie:
                actions[(s, g)] = a
            else:
                actions[(s, g)] = int(np.flatnonzero(best - weighted <= tie)[0])
    return AgentPolicy(actions)


def nosig_value(mdp: PersuasionMDP) -> tuple[np.ndarray, AgentPolicy]:
    """Agent's optimal value per state with no information, and the matching policy.

    The policy is keyed by ``(s, 0)``, the single signal of the uninformative strategy.
    """
    meta = build_meta_mdp(mdp, uninformative(mdp))
    values, policy = solve_mdp(meta)
    vbar = np.zeros(mdp.n_states)
    for (s, g), v in zip(meta.meta_states, values.values):
        vbar[s] = v if g != TERMINAL_SIGNAL else 0.0
    return vbar, policy


def am_rewards(mdp: PersuasionMDP, vbar: np.ndarray | None = None) -> np.ndarray:
    """Immediate reward plus the discounted no-information continuation value."""
    if vbar is None:
        vbar, _ = nosig_value(mdp)
    continuation = mdp.transition @ vbar  # (S, A)
    out = mdp.agent_reward + mdp.gamma_tilde * continuation[:, None, :]
    return np.where(mdp.available[:, None, :], out, 0.0)
