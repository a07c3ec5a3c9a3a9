"""Numerical tolerances used across the package, kept in one place."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    prob_sum: float = 1e-12  # distribution rows must sum to 1 within this
    ic: float = 1e-9  # incentive constraints, unnormalized (probability-weighted) form
    tie: float = 1e-9  # agent tie-breaking, same scale as ``ic``
    value_iteration: float = 1e-9
    lp_feasibility: float = 1e-7
    eval_match: float = 1e-6
    recovery_mismatch: float = 1e-5
    threat_match: float = 1e-5
    weight_floor: float = 1e-6  # LP objective weights are max(z_s, weight_floor / |S|)
    max_iterations: int = 1_000_000


TOL = Tolerances()
