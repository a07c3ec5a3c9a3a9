"""Persuasion MDPs, signaling strategies, posteriors and incentive checks.

Array conventions used throughout the package:

* ``transition[s, a, s']``
* ``prior[s, theta]``
* ``principal_reward[s, theta, a]`` and ``agent_reward[s, theta, a]``
* strategy probabilities ``probs[s, theta, g]``

Terminal states have no available actions and zero rewards; entering one
ends the episode, which is the same as an absorbing zero-reward state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .config import TOL
from .errors import InvariantViolation, NotIncentiveCompatible, ZeroProbabilitySignal


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_simplex(rows: np.ndarray, what: str, tol: float = TOL.prob_sum) -> None:
    if not np.all(np.isfinite(rows)):
        raise InvariantViolation(f"{what}: non-finite entries")
    if np.any(rows < 0):
        raise InvariantViolation(f"{what}: negative probability")
    sums = rows.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise InvariantViolation(f"{what}: row {idx} sums to {sums[idx]!r}, expected 1")


@dataclass(frozen=True, eq=False)
class PersuasionMDP:
    """An MDP whose rewards depend on an external parameter only the principal sees."""

    state_names: tuple[str, ...]
    terminal: np.ndarray
    action_names: tuple[str, ...]
    theta_names: tuple[str, ...]
    available: np.ndarray
    transition: np.ndarray
    prior: np.ndarray
    principal_reward: np.ndarray
    agent_reward: np.ndarray
    gamma: float
    gamma_tilde: float
    init_dist: np.ndarray

    def __post_init__(self):
        S, A, T = len(self.state_names), len(self.action_names), len(self.theta_names)
        if min(S, A, T) == 0:
            raise InvariantViolation("states, actions and thetas must all be nonempty")
        terminal = np.array(self.terminal, dtype=bool)
        available = np.array(self.available, dtype=bool)
        shapes = {
            "terminal": (terminal, (S,)),
            "available_actions": (available, (S, A)),
            "transition": (np.asarray(self.transition, dtype=float), (S, A, S)),
            "prior": (np.asarray(self.prior, dtype=float), (S, T)),
            "principal_reward": (np.asarray(self.principal_reward, dtype=float), (S, T, A)),
            "agent_reward": (np.asarray(self.agent_reward, dtype=float), (S, T, A)),
            "init_dist": (np.asarray(self.init_dist, dtype=float), (S,)),
        }
        for name, (arr, shape) in shapes.items():
            if arr.shape != shape:
                raise InvariantViolation(f"{name}: shape {arr.shape}, expected {shape}")
        for name in ("gamma", "gamma_tilde"):
            g = float(getattr(self, name))
            if not 0.0 <= g < 1.0:
                raise InvariantViolation(f"{name}: {g} not in [0, 1)")
            object.__setattr__(self, name, g)

        available[terminal] = False
        live = ~terminal
        if np.any(live & ~available.any(axis=1)):
            s = int(np.argmax(live & ~available.any(axis=1)))
            raise InvariantViolation(f"available_actions: non-terminal state {s} has no action")

        transition = np.where(available[:, :, None], shapes["transition"][0], 0.0)
        _check_simplex(transition[available], "transition")
        prior = shapes["prior"][0]
        _check_simplex(prior, "prior")
        init = shapes["init_dist"][0]
        _check_simplex(init[None, :], "init_dist")
        mask = available[:, None, :]
        rewards = {}
        for name in ("principal_reward", "agent_reward"):
            r = shapes[name][0]
            if not np.all(np.isfinite(r[np.broadcast_to(mask, r.shape)])):
                raise InvariantViolation(f"{name}: non-finite entries")
            rewards[name] = np.where(mask, r, 0.0)

        object.__setattr__(self, "state_names", tuple(str(x) for x in self.state_names))
        object.__setattr__(self, "action_names", tuple(str(x) for x in self.action_names))
        object.__setattr__(self, "theta_names", tuple(str(x) for x in self.theta_names))
        object.__setattr__(self, "terminal", _frozen(terminal, bool))
        object.__setattr__(self, "available", _frozen(available, bool))
        object.__setattr__(self, "transition", _frozen(transition))
        object.__setattr__(self, "prior", _frozen(prior))
        object.__setattr__(self, "principal_reward", _frozen(rewards["principal_reward"]))
        object.__setattr__(self, "agent_reward", _frozen(rewards["agent_reward"]))
        object.__setattr__(self, "init_dist", _frozen(init))

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def n_thetas(self) -> int:
        return len(self.theta_names)

    def actions_at(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.available[s])

    def reward_bound(self) -> float:
        """Largest absolute reward of either player (at least a tiny positive number)."""
        r = max(np.abs(self.principal_reward).max(), np.abs(self.agent_reward).max())
        return float(max(r, 1e-300))

    def replace(self, **changes) -> "PersuasionMDP":
        fields = {
            name: getattr(self, name)
            for name in (
                "state_names", "terminal", "action_names", "theta_names", "available",
                "transition", "prior", "principal_reward", "agent_reward", "gamma",
                "gamma_tilde", "init_dist",
            )
        }
        fields.update(changes)
        return PersuasionMDP(**fields)

    def __eq__(self, other):
        if not isinstance(other, PersuasionMDP):
            return NotImplemented
        return (
            self.state_names == other.state_names
            and self.action_names == other.action_names
            and self.theta_names == other.theta_names
            and self.gamma == other.gamma
            and self.gamma_tilde == other.gamma_tilde
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("terminal", "available", "transition", "prior",
                          "principal_reward", "agent_reward", "init_dist")
            )
        )

    __hash__ = None

    # JSON document layout; see ``instances.load_instance`` for the file wrapper.
    def to_dict(self) -> dict:
        return {
            "states": [{"name": n, "terminal": bool(t)} for n, t in zip(self.state_names, self.terminal)],
            "actions": list(self.action_names),
            "thetas": list(self.theta_names),
            "available_actions": [self.actions_at(s).tolist() for s in range(self.n_states)],
            "transition": self.transition.tolist(),
            "prior": self.prior.tolist(),
            "principal_reward": self.principal_reward.tolist(),
            "agent_reward": self.agent_reward.tolist(),
            "gamma": self.gamma,
            "gamma_tilde": self.gamma_tilde,
            "init_dist": self.init_dist.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PersuasionMDP":
        states = doc["states"]
        actions = list(doc["actions"])
        available = np.zeros((len(states), len(actions)), dtype=bool)
        for s, acts in enumerate(doc["available_actions"]):
            for a in acts:
                a = actions.index(a) if isinstance(a, str) else int(a)
                if not 0 <= a < len(actions):
                    raise InvariantViolation(f"available_actions: state {s} lists unknown action {a}")
                available[s, a] = True
        if len(doc["available_actions"]) != len(states):
            raise InvariantViolation("available_actions: one entry per state required")
        return cls(
            state_names=tuple(st["name"] for st in states),
            terminal=np.array([bool(st.get("terminal", False)) for st in states]),
            action_names=tuple(actions),
            theta_names=tuple(doc["thetas"]),
            available=available,
            transition=np.array(doc["transition"], dtype=float),
            prior=np.array(doc["prior"], dtype=float),
            principal_reward=np.array(doc["principal_reward"], dtype=float),
            agent_reward=np.array(doc["agent_reward"], dtype=float),
            gamma=doc["gamma"],
            gamma_tilde=doc["gamma_tilde"],
            init_dist=np.array(doc["init_dist"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class GeneralSignaling:
    """Markovian signaling strategy over a finite signal set.

    ``probs[s, theta, g]`` is the probability of sending signal ``g`` in state
    ``s`` when the parameter is ``theta``. Rows of terminal states are ignored.
    """

    probs: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 3 or probs.shape[2] != len(self.labels):
            raise InvariantViolation(f"signaling probs shape {probs.shape} does not match {len(self.labels)} labels")
        object.__setattr__(self, "probs", _frozen(probs))
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def n_signals(self) -> int:
        return len(self.labels)

    def advised_action(self, g: int) -> int | None:
        """The action a signal recommends, if signals are action advice."""
        return None

    def validate(self, mdp: PersuasionMDP) -> None:
        if self.probs.shape[:2] != (mdp.n_states, mdp.n_thetas):
            raise InvariantViolation(f"strategy shape {self.probs.shape} does not fit the MDP")
        _check_simplex(self.probs[~mdp.terminal], "signaling strategy")

    def signal_marginals(self, mdp: PersuasionMDP) -> np.ndarray:
        """``q[s, g] = sum_theta mu_s(theta) pi_s(theta, g)``."""
        return np.einsum("st,stg->sg", mdp.prior, self.probs)


@dataclass(frozen=True, eq=False)
class ActionAdvice(GeneralSignaling):
    """Signaling strategy whose signal ``g`` means "take action ``g``"."""

    @classmethod
    def from_array(cls, mdp: PersuasionMDP, probs) -> "ActionAdvice":
        advice = cls(np.asarray(probs, dtype=float), mdp.action_names)
        advice.validate(mdp)
        return advice

    def advised_action(self, g: int) -> int | None:
        return g

    def validate(self, mdp: PersuasionMDP) -> None:
        if self.probs.shape != (mdp.n_states, mdp.n_thetas, mdp.n_actions):
            raise InvariantViolation(f"advice shape {self.probs.shape} does not fit the MDP")
        outside = self.probs * ~mdp.available[:, None, :]
        if np.any(outside[~mdp.terminal] > 0):
            raise InvariantViolation("advice recommends an unavailable action")
        _check_simplex(self.probs[~mdp.terminal], "action advice")


@dataclass(frozen=True, eq=False)
class ThreatStrategy:
    """One-memory strategy: play ``base`` until the agent disobeys, then go silent forever.

    The silent signal is indexed ``n_actions`` in threat meta-states.
    """

    base: ActionAdvice
    ic_violation: float = field(default=0.0)

    @classmethod
    def for_mdp(cls, mdp: PersuasionMDP, base: ActionAdvice, tol: float = TOL.ic) -> "ThreatStrategy":
        from .agent import am_rewards

        base.validate(mdp)
        ok, violation = is_ic(mdp, base, am_rewards(mdp), tol=tol)
        if not ok:
            raise NotIncentiveCompatible(f"base advice violates advice-myopic IC by {violation:.3g}")
        return cls(base, violation)

    @property
    def silent_signal(self) -> int:
        return self.base.n_signals


def posterior(mdp: PersuasionMDP, strategy: GeneralSignaling, s: int, g: int) -> np.ndarray:
    weights = mdp.prior[s] * strategy.probs[s, :, g]
    total = weights.sum()
    if total <= 0.0:
        raise ZeroProbabilitySignal(f"signal {g} is never sent in state {s}")
    return weights / total


def joint_distribution(mdp: PersuasionMDP, advice: ActionAdvice, s: int) -> np.ndarray:
    """``phi[theta, a]``: probability that the parameter is ``theta`` and ``a`` is advised."""
    return mdp.prior[s][:, None] * advice.probs[s]


def is_ic(mdp: PersuasionMDP, advice: ActionAdvice, reward: np.ndarray | None = None,
          tol: float = TOL.ic) -> tuple[bool, float]:
    """Check obedience incentives in the probability-weighted form.

    For every state ``s``, advised ``a`` and alternative ``b`` in ``A_s`` the
    quantity ``sum_theta mu pi(theta, a) (reward(a) - reward(b))`` must be at
    least ``-tol``. Returns the flag and the largest shortfall (0 when IC).
    """
    reward = mdp.agent_reward if reward is None else np.asarray(reward, dtype=float)
    worst = 0.0
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            continue
        acts = mdp.actions_at(s)
        x = joint_distribution(mdp, advice, s)[:, acts]  # theta x advised
        r = reward[s][:, acts]  # theta x action
        # gain[a, b] = sum_theta x[theta, a] (r[theta, a] - r[theta, b])
        own = np.einsum("ta,ta->a", x, r)
        cross = x.T @ r
        shortfall = (cross - own[:, None]).max()
        worst = max(worst, float(shortfall))
    return worst <= tol, worst


def reveal_all(mdp: PersuasionMDP) -> GeneralSignaling:
    probs = np.broadcast_to(np.eye(mdp.n_thetas), (mdp.n_states, mdp.n_thetas, mdp.n_thetas))
    return GeneralSignaling(probs, tuple(f"g_{t}" for t in mdp.theta_names))


def uninformative(mdp: PersuasionMDP) -> GeneralSignaling:
    return GeneralSignaling(np.ones((mdp.n_states, mdp.n_thetas, 1)), ("g_0",))


def revelation_transform(mdp: PersuasionMDP, strategy: GeneralSignaling, response) -> ActionAdvice:
    """Merge signals by the action the agent takes on them.

    ``response`` maps meta-states ``(s, g)`` to actions. Signals that the
    response does not cover are never sent under the prior; their (zero
    prior-weighted) mass goes to the lowest available action.
    """
    out = np.zeros((mdp.n_states, mdp.n_thetas, mdp.n_actions))
    for s in range(mdp.n_states):
        if mdp.terminal[s]:
            continue
        fallback = int(mdp.actions_at(s)[0])
        for g in range(strategy.n_signals):
            a = response.get((s, g), fallback)
            out[s, :, a] += strategy.probs[s, :, g]
    return ActionAdvice.from_array(mdp, out)
