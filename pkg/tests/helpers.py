"""Instance builders shared by the test modules."""

import numpy as np

from persuasion.instances import RandomSpec, gen_random


def random_mdp(seed, n_states=4, n_actions=3, n_thetas=2, n_terminal=1, beta=0.0, gamma=0.8, gamma_tilde=0.8):
    return gen_random(RandomSpec(n_states, n_actions, n_thetas, n_terminal, beta, gamma, gamma_tilde, seed))


def random_advice_probs(mdp, rng):
    """Random action advice supported on the available actions."""
    probs = rng.random((mdp.n_states, mdp.n_thetas, mdp.n_actions)) * mdp.available[:, None, :]
    probs[mdp.terminal] = 0.0
    live = ~mdp.terminal
    probs[live] /= probs[live].sum(axis=2, keepdims=True)
    return probs


def single_state_mdp(n_actions=2, n_thetas=2, seed=0):
    """One live state that always moves to a terminal state."""
    mdp = random_mdp(seed, n_states=2, n_actions=n_actions, n_thetas=n_thetas, n_terminal=1)
    live = int(np.flatnonzero(~mdp.terminal)[0])
    transition = np.zeros_like(mdp.transition)
    transition[:, :, 1 - live] = 1.0
    init = np.zeros(2)
    init[live] = 1.0
    return mdp.replace(transition=transition, init_dist=init)

