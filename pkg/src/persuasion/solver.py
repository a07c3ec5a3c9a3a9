"""Principal side: optimal advice against myopic and advice-myopic agents,
the threat strategy for far-sighted agents, and the two benchmarks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .agent import (
    am_rewards,
    build_threat_meta_mdp,
    disobeyed_meta_states,
    iteration_budget,
    nosig_value,
    solve_mdp,
)
from .config import TOL
from .errors import CorollaryViolation, LPFailure, NonConvergence, RecoveryMismatch
from .evaluation import exact_eval
from .lp import LinearProgram, LPStatus, lp_solve
from .model import (
    ActionAdvice,
    PersuasionMDP,
    ThreatStrategy,
    is_ic,
    joint_distribution,
    uninformative,
)
from .agent import AgentPolicy

METHODS = ("myop", "am", "threat", "nosig-myop", "nosig-fs", "full-control")


@dataclass
class DualLPSolution:
    """Optimal values and the per-state multipliers of the combined dual LP.

    ``I[s, a, b]`` prices the obedience constraint (advised ``a`` vs ``b``),
    ``J[s, theta]`` the normalisation of the advice for ``theta`` and
    ``K[s, a, theta]`` its nonnegativity.
    """

    V: np.ndarray
    I: np.ndarray
    J: np.ndarray
    K: np.ndarray
    objective: float
    status: LPStatus
    iterations: int
    max_violation: float


@dataclass
class SolveReport:
    method: str
    strategy: ActionAdvice | ThreatStrategy | None
    principal_payoff: float
    agent_payoff: float
    diagnostics: dict[str, Any] = field(default_factory=dict)
    dual: DualLPSolution | None = None

    def to_dict(self) -> dict:
        if self.strategy is None:
            strategy = None
        elif isinstance(self.strategy, ThreatStrategy):
            strategy = {"kind": "threat", "advice": self.strategy.base.probs.tolist()}
        else:
            strategy = {"kind": "action_advice", "advice": self.strategy.probs.tolist()}
        return {
            "method": self.method,
            "principal_payoff": self.principal_payoff,
            "agent_payoff": self.agent_payoff,
            "strategy": strategy,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, LPStatus):
        return obj.value
    return obj


def lp_weights(mdp: PersuasionMDP, floor: float = TOL.weight_floor) -> np.ndarray:
    return np.maximum(mdp.init_dist, floor / mdp.n_states)


def build_dual_lp(mdp: PersuasionMDP, reward: np.ndarray) -> tuple[LinearProgram, dict]:
    """Assemble the value LP in which each state's best IC advice is replaced by its LP dual.

    Variables are ``V[s]``, ``J[s, theta]`` (free) and ``I[s, a, b] >= 0`` for
    distinct available actions. Rows:

    * ``V[s] - sum_theta J[s, theta] >= 0``
    * ``J[s, theta] - gamma mu(theta) P(s, a) . V
      - mu(theta) sum_b I[s, a, b] (reward(s, theta, a) - reward(s, theta, b))
      >= mu(theta) R(s, theta, a)`` for each ``theta`` and ``a in A_s``.

    The slack of the second family is ``K[s, a, theta]``.
    """
    S, T = mdp.n_states, mdp.n_thetas
    n = S + S * T
    i_index = {}
    for s in range(S):
        if mdp.terminal[s]:
            continue
        acts = mdp.actions_at(s)
        for a in acts:
            for b in acts:
                if a != b:
                    i_index[(s, int(a), int(b))] = n
                    n += 1
    lp = LinearProgram(n)
    lp.objective[:S] = lp_weights(mdp)
    lp.lower[S + S * T:] = 0.0
    lp.lower[:S][mdp.terminal] = 0.0
    lp.upper[:S][mdp.terminal] = 0.0

    def j(s, t):
        return S + s * T + t

    for s in range(S):
        if mdp.terminal[s]:
            continue
        row = {s: 1.0}
        for t in range(T):
            row[j(s, t)] = -1.0
        lp.add_row(row, ">=", 0.0)
        acts = [int(a) for a in mdp.actions_at(s)]
        for a in acts:
            next_v = mdp.transition[s, a]
            for t in range(T):
                mu = mdp.prior[s, t]
                row = {j(s, t): 1.0}
                for s2 in np.flatnonzero(next_v):
                    row[int(s2)] = row.get(int(s2), 0.0) - mdp.gamma * mu * next_v[s2]
                if mu > 0:
                    for b in acts:
                        if b != a:
                            coef = -mu * (reward[s, t, a] - reward[s, t, b])
                            if coef != 0.0:
                                row[i_index[(s, a, b)]] = coef
                lp.add_row(row, ">=", mu * mdp.principal_reward[s, t, a])
    return lp, i_index


def solve_dual_lp(mdp: PersuasionMDP, reward: np.ndarray | None = None) -> DualLPSolution:
    reward = mdp.agent_reward if reward is None else reward
    lp, i_index = build_dual_lp(mdp, reward)
    res = lp_solve(lp)
    if res.status is not LPStatus.OPTIMAL:
        raise LPFailure(res.status, res.message)
    S, T, A = mdp.n_states, mdp.n_thetas, mdp.n_actions
    x = res.x
    V = x[:S].copy()
    V[mdp.terminal] = 0.0
    J = x[S:S + S * T].reshape(S, T)
    I = np.zeros((S, A, A))
    for (s, a, b), k in i_index.items():
        I[s, a, b] = x[k]
    K = np.zeros((S, A, T))
    for s in range(S):
        if mdp.terminal[s]:
            continue
        for a in mdp.actions_at(s):
            cont = mdp.principal_reward[s, :, a] + mdp.gamma * (mdp.transition[s, a] @ V)
            ic = (I[s, a, None, :] * (reward[s, :, a, None] - reward[s])).sum(axis=1)
            K[s, a] = J[s] - mdp.prior[s] * (cont + ic)
    return DualLPSolution(V, I, J, K, float(mdp.init_dist @ V), res.status, res.iterations,
                          lp.max_violation(x))


def recover_advice(mdp: PersuasionMDP, V: np.ndarray, reward: np.ndarray | None = None) -> ActionAdvice:
    """Per state, the IC advice maximising ``E[R + gamma P V]`` with ``V`` held fixed."""
    reward = mdp.agent_reward if reward is None else reward
    S, T, A = mdp.n_states, mdp.n_thetas, mdp.n_actions
    probs = np.zeros((S, T, A))
    for s in range(S):
        if mdp.terminal[s]:
            continue
        acts = [int(a) for a in mdp.actions_at(s)]
        if len(acts) == 1:
            probs[s, :, acts[0]] = 1.0
            continue
        nA = len(acts)
        lp = LinearProgram(T * nA)
        lp.lower[:] = 0.0
        lp.upper[:] = 1.0
        mu = mdp.prior[s]
        for k, a in enumerate(acts):
            value = mdp.principal_reward[s, :, a] + mdp.gamma * (mdp.transition[s, a] @ V)
            lp.objective[k * T:(k + 1) * T] = -(mu * value)
        for k, a in enumerate(acts):
            for b in acts:
                if b == a:
                    continue
                coeffs = mu * (reward[s, :, a] - reward[s, :, b])
                row = {k * T + t: float(c) for t, c in enumerate(coeffs) if c != 0.0}
                if row:
                    lp.add_row(row, ">=", 0.0)
        for t in range(T):
            lp.add_row({k * T + t: 1.0 for k in range(nA)}, "=", 1.0)
        res = lp_solve(lp)
        if res.status is not LPStatus.OPTIMAL:
            raise LPFailure(res.status, f"advice recovery at state {s}: {res.message}")
        sol = np.clip(res.x.reshape(nA, T), 0.0, None)
        sol[sol < 1e-13] = 0.0
        sol /= sol.sum(axis=0, keepdims=True)
        probs[s][:, acts] = sol.T
    return ActionAdvice.from_array(mdp, probs)


def obedient_values(mdp: PersuasionMDP, advice: ActionAdvice, agent: bool = False) -> np.ndarray:
    """State values when the agent always follows ``advice``."""
    S = mdp.n_states
    discount = mdp.gamma_tilde if agent else mdp.gamma
    rewards = mdp.agent_reward if agent else mdp.principal_reward
    P = np.zeros((S, S))
    r = np.zeros(S)
    for s in range(S):
        if mdp.terminal[s]:
            continue
        phi = joint_distribution(mdp, advice, s)
        r[s] = (phi * rewards[s]).sum()
        P[s] = phi.sum(axis=0) @ mdp.transition[s]
    return np.linalg.solve(np.eye(S) - discount * P, r)


def opt_sig_myop(mdp: PersuasionMDP, reward: np.ndarray | None = None, method: str = "myop",
                 tol=TOL) -> SolveReport:
    """Optimal IC action advice for an agent that best-responds to ``reward`` myopically."""
    start = time.perf_counter()
    reward = mdp.agent_reward if reward is None else np.asarray(reward, dtype=float)
    dual = solve_dual_lp(mdp, reward)
    advice = recover_advice(mdp, dual.V, reward)
    payoff = float(mdp.init_dist @ dual.V)
    recovered = float(mdp.init_dist @ obedient_values(mdp, advice))
    if abs(recovered - payoff) > tol.recovery_mismatch:
        raise RecoveryMismatch(f"recovered advice earns {recovered:.9g}, LP value is {payoff:.9g}")
    _, violation = is_ic(mdp, advice, reward, tol=tol.ic)
    agent = float(mdp.init_dist @ obedient_values(mdp, advice, agent=True))
    return SolveReport(
        method=method,
        strategy=advice,
        principal_payoff=payoff,
        agent_payoff=agent,
        diagnostics={
            "lp_status": dual.status.value,
            "lp_iterations": dual.iterations,
            "lp_max_violation": dual.max_violation,
            "recovered_payoff": recovered,
            "ic_violation": violation,
            "wall_time": time.perf_counter() - start,
        },
        dual=dual,
    )


def opt_sig_am(mdp: PersuasionMDP, tol=TOL) -> SolveReport:
    """Optimal advice against an agent who values the future as if no more signals came."""
    start = time.perf_counter()
    vbar, _ = nosig_value(mdp)
    report = opt_sig_myop(mdp, am_rewards(mdp, vbar), method="am", tol=tol)
    report.diagnostics["nosig_agent_values"] = vbar
    report.diagnostics["wall_time"] = time.perf_counter() - start
    return report


def threat_strategy(mdp: PersuasionMDP, tol=TOL) -> tuple[ThreatStrategy, SolveReport]:
    """Wrap the advice-myopic optimum in a go-silent-on-deviation threat and verify it.

    The far-sighted best response to the threat is computed from scratch and
    evaluated exactly; its principal payoff must match the advice-myopic one.
    """
    start = time.perf_counter()
    am = opt_sig_am(mdp, tol=tol)
    threat = ThreatStrategy.for_mdp(mdp, am.strategy, tol=tol.ic)
    meta = build_threat_meta_mdp(mdp, threat)
    values, policy = solve_mdp(meta)
    result = exact_eval(mdp, threat, policy, method="threat")
    if abs(result.principal - am.principal_payoff) > tol.threat_match:
        raise CorollaryViolation(
            f"far-sighted response to the threat earns {result.principal:.9g}, "
            f"advice-myopic optimum is {am.principal_payoff:.9g}")
    disobeyed = disobeyed_meta_states(meta, policy)
    return threat, SolveReport(
        method="threat",
        strategy=threat,
        principal_payoff=result.principal,
        agent_payoff=result.agent,
        diagnostics={
            "am_payoff": am.principal_payoff,
            "disobeyed_meta_states": [list(m) for m in disobeyed],
            "meta_states": meta.size,
            "value_iterations": values.iterations,
            "policy_iterations": values.policy_iterations,
            "lp_status": am.diagnostics["lp_status"],
            "wall_time": time.perf_counter() - start,
        },
    )


def _dictation_values(mdp, dictation, rewards, discount):
    S = mdp.n_states
    P = np.zeros((S, S))
    r = np.zeros(S)
    for s in range(S):
        if mdp.terminal[s]:
            continue
        for t in range(mdp.n_thetas):
            a = dictation[s, t]
            P[s] += mdp.prior[s, t] * mdp.transition[s, a]
            r[s] += mdp.prior[s, t] * rewards[s, t, a]
    return np.linalg.solve(np.eye(S) - discount * P, r)


def _dictate(mdp, V):
    S, T = mdp.n_states, mdp.n_thetas
    q = mdp.principal_reward + mdp.gamma * (mdp.transition @ V)[:, None, :]
    q = np.where(mdp.available[:, None, :], q, -np.inf)
    dictation = np.zeros((S, T), dtype=int)
    for s in range(S):
        if mdp.terminal[s]:
            continue
        best = q[s].max(axis=1, keepdims=True)
        dictation[s] = np.argmax(q[s] >= best - 1e-12, axis=1)
    return dictation, q


def full_control(mdp: PersuasionMDP, tol=TOL) -> SolveReport:
    """Upper benchmark: the principal sees the parameter and picks the action."""
    start = time.perf_counter()
    budget = iteration_budget(mdp.gamma, float(np.abs(mdp.principal_reward).max()), tol.value_iteration)
    threshold = tol.value_iteration * (1 - mdp.gamma) / mdp.gamma if mdp.gamma > 0 else np.inf
    V = np.zeros(mdp.n_states)
    for it in range(1, budget + 1):
        _, q = _dictate(mdp, V)
        best = np.where(mdp.terminal[:, None], 0.0, q.max(axis=2))
        V_new = (mdp.prior * best).sum(axis=1)
        delta = float(np.abs(V_new - V).max())
        V = V_new
        if delta <= threshold:
            break
    else:
        raise NonConvergence(f"full-control value iteration did not converge in {budget} iterations")
    dictation, _ = _dictate(mdp, V)
    for _ in range(100):
        V = _dictation_values(mdp, dictation, mdp.principal_reward, mdp.gamma)
        improved, _ = _dictate(mdp, V)
        if np.array_equal(improved, dictation):
            break
        dictation = improved
    agent = _dictation_values(mdp, dictation, mdp.agent_reward, mdp.gamma_tilde)
    return SolveReport(
        method="full-control",
        strategy=None,
        principal_payoff=float(mdp.init_dist @ V),
        agent_payoff=float(mdp.init_dist @ agent),
        diagnostics={"dictation": dictation, "value_iterations": it,
                     "wall_time": time.perf_counter() - start},
    )


def myopic_prior_policy(mdp: PersuasionMDP, tie: float = TOL.tie) -> AgentPolicy:
    """Per state, the action with the best prior-expected immediate reward."""
    expected = np.einsum("st,sta->sa", mdp.prior, mdp.agent_reward)
    expected = np.where(mdp.available, expected, -np.inf)
    actions = {}
    for s in range(mdp.n_states):
        if not mdp.terminal[s]:
            actions[(s, 0)] = int(np.flatnonzero(expected[s] >= expected[s].max() - tie)[0])
    return AgentPolicy(actions)


def nosig(mdp: PersuasionMDP, agent_type: str = "fs") -> SolveReport:
    """Lower benchmark: no signals at all, agent acts on the prior."""
    start = time.perf_counter()
    if agent_type in ("myopic", "myop"):
        policy, method = myopic_prior_policy(mdp), "nosig-myop"
    elif agent_type in ("fs", "am"):
        _, policy = nosig_value(mdp)
        method = "nosig-fs"
    else:
        raise ValueError(f"unknown agent type {agent_type!r}")
    result = exact_eval(mdp, uninformative(mdp), policy, method=method)
    return SolveReport(
        method=method,
        strategy=None,
        principal_payoff=result.principal,
        agent_payoff=result.agent,
        diagnostics={"policy": {f"{s}": a for (s, _), a in policy.items()},
                     "wall_time": time.perf_counter() - start},
    )


def solve(mdp: PersuasionMDP, method: str) -> SolveReport:
    """Dispatch on a method tag from :data:`METHODS`."""
    if method == "myop":
        return opt_sig_myop(mdp)
    if method == "am":
        return opt_sig_am(mdp)
    if method == "threat":
        return threat_strategy(mdp)[1]
    if method == "nosig-myop":
        return nosig(mdp, "myopic")
    if method == "nosig-fs":
        return nosig(mdp, "fs")
    if method == "full-control":
        return full_control(mdp)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
