"""Exact and simulated evaluation of a committed strategy against an agent policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agent import (
    TERMINAL_SIGNAL,
    AgentPolicy,
    MetaMDP,
    build_meta_mdp,
    build_threat_meta_mdp,
    policy_array,
    reachable,
)
from .errors import InvalidHorizon, PolicyUndefined, SingularSystem
from .model import GeneralSignaling, PersuasionMDP, ThreatStrategy


@dataclass
class EvalResult:
    principal: float
    agent: float
    method: str = ""
    # Monte Carlo only
    principal_sd: float | None = None
    agent_sd: float | None = None
    n_samples: int | None = None
    horizon: int | None = None

    @property
    def principal_se(self) -> float | None:
        if self.principal_sd is None:
            return None
        return self.principal_sd / math.sqrt(self.n_samples)

    @property
    def agent_se(self) -> float | None:
        if self.agent_sd is None:
            return None
        return self.agent_sd / math.sqrt(self.n_samples)


def meta_for(mdp: PersuasionMDP, strategy) -> MetaMDP:
    if isinstance(strategy, ThreatStrategy):
        return build_threat_meta_mdp(mdp, strategy)
    return build_meta_mdp(mdp, strategy)


def chain_values(meta: MetaMDP, policy: np.ndarray, reach: np.ndarray, reward: np.ndarray,
                 discount: float) -> np.ndarray:
    idx = np.flatnonzero(reach & ~meta.terminal)
    values = np.zeros(meta.size)
    if idx.size == 0:
        return values
    acts = policy[idx]
    T = meta.transition[idx, acts][:, idx]
    r = reward[idx, acts]
    try:
        values[idx] = np.linalg.solve(np.eye(idx.size) - discount * T, r)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return values


def exact_eval(mdp: PersuasionMDP, strategy: GeneralSignaling | ThreatStrategy, policy: AgentPolicy,
               method: str = "") -> EvalResult:
    """Discounted payoffs of both players by solving the induced Markov chain.

    Only meta-states reachable from the initial distribution enter the linear
    systems, so ``policy`` needs to cover just those.
    """
    meta = meta_for(mdp, strategy)
    arr = policy_array(meta, policy)
    reach = reachable(meta, arr)
    missing = np.flatnonzero(reach & ~meta.terminal & (arr < 0))
    if missing.size:
        raise PolicyUndefined(f"policy has no action at reachable meta-state {meta.meta_states[missing[0]]}")
    bad = [i for i in np.flatnonzero(reach & ~meta.terminal) if not meta.available[i, arr[i]]]
    if bad:
        raise PolicyUndefined(f"policy picks an unavailable action at {meta.meta_states[bad[0]]}")
    v_principal = chain_values(meta, arr, reach, meta.principal_reward, mdp.gamma)
    v_agent = chain_values(meta, arr, reach, meta.agent_reward, mdp.gamma_tilde)
    return EvalResult(float(meta.init @ v_principal), float(meta.init @ v_agent), method)


def default_horizon(gamma: float, r_max: float, eps: float = 1e-6, cap: int = 100_000) -> int:
    """Steps after which the discounted tail is below ``eps``."""
    if gamma <= 0.0:
        return 1
    r_max = max(r_max, eps)
    n = math.log(eps * (1.0 - gamma) / r_max) / math.log(gamma)
    return int(min(cap, max(1, math.ceil(n))))


def truncation_bound(gamma: float, horizon: int, r_max: float) -> float:
    return gamma ** horizon * r_max / (1.0 - gamma)


def _draw(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one row of ``cum`` per sample."""
    out = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(out, cum.shape[1] - 1)


def rollout(mdp: PersuasionMDP, strategy: GeneralSignaling | ThreatStrategy, policy: AgentPolicy,
            horizon: int | None = None, n_samples: int = 10_000, seed: int = 0,
            method: str = "") -> EvalResult:
    """Simulate the interaction loop and average discounted returns.

    Each step draws the parameter from the prior, a signal from the strategy
    (or the silent signal once a threat has been triggered), the agent's
    action from ``policy`` and the next state. Episodes stop at terminal
    states or after ``horizon`` steps.
    """
    r_max = mdp.reward_bound()
    if horizon is None:
        horizon = default_horizon(max(mdp.gamma, mdp.gamma_tilde), r_max)
    if horizon < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {horizon}")
    if n_samples < 1:
        raise InvalidHorizon(f"need at least one sample, got {n_samples}")
    rng = np.random.Generator(np.random.PCG64(seed))

    threat = isinstance(strategy, ThreatStrategy)
    signals = strategy.base if threat else strategy
    G = signals.n_signals
    silent = G  # only used by the threat strategy
    table = np.full((mdp.n_states, G + 1), -1)
    for (s, g), a in policy.items():
        if g != TERMINAL_SIGNAL:
            table[s, g] = a

    cum_prior = np.cumsum(mdp.prior, axis=1)
    cum_signal = np.cumsum(signals.probs, axis=2)
    cum_next = np.cumsum(mdp.transition, axis=2)
    cum_init = np.cumsum(mdp.init_dist)

    state = _draw(np.broadcast_to(cum_init, (n_samples, mdp.n_states)), rng.random(n_samples))
    alive = ~mdp.terminal[state]
    punished = np.zeros(n_samples, dtype=bool)
    ret_p = np.zeros(n_samples)
    ret_a = np.zeros(n_samples)
    disc_p = disc_a = 1.0
    for _ in range(horizon):
        if not alive.any():
            break
        ix = np.flatnonzero(alive)
        s = state[ix]
        theta = _draw(cum_prior[s], rng.random(ix.size))
        g = _draw(cum_signal[s, theta], rng.random(ix.size))
        if threat:
            g = np.where(punished[ix], silent, g)
        a = table[s, g]
        if np.any(a < 0):
            k = int(np.flatnonzero(a < 0)[0])
            raise PolicyUndefined(f"policy has no action at meta-state {(int(s[k]), int(g[k]))}")
        ret_p[ix] += disc_p * mdp.principal_reward[s, theta, a]
        ret_a[ix] += disc_a * mdp.agent_reward[s, theta, a]
        if threat:
            punished[ix] |= (g != silent) & (a != g)
        nxt = _draw(cum_next[s, a], rng.random(ix.size))
        state[ix] = nxt
        alive[ix] = ~mdp.terminal[nxt]
        disc_p *= mdp.gamma
        disc_a *= mdp.gamma_tilde

    ddof = 1 if n_samples > 1 else 0
    return EvalResult(
        principal=float(ret_p.mean()),
        agent=float(ret_a.mean()),
        method=method,
        principal_sd=float(ret_p.std(ddof=ddof)),
        agent_sd=float(ret_a.std(ddof=ddof)),
        n_samples=n_samples,
        horizon=horizon,
    )
