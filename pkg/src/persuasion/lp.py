"""Small solver-agnostic LP container backed by HiGHS (through SciPy)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class LinearProgram:
    """``minimize c @ x`` subject to sparse rows ``coeffs @ x  (<=|>=|=)  rhs``.

    Variables are free unless bounds are set.
    """

    n_vars: int
    objective: np.ndarray = None
    rows: list = field(default_factory=list)
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        if self.objective is None:
            self.objective = np.zeros(self.n_vars)
        self.objective = np.asarray(self.objective, dtype=float)
        if self.lower is None:
            self.lower = np.full(self.n_vars, -np.inf)
        if self.upper is None:
            self.upper = np.full(self.n_vars, np.inf)

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float) -> None:
        if sense not in ("<=", ">=", "="):
            raise ValueError(f"unknown comparator {sense!r}")
        if not np.isfinite(rhs) or not all(np.isfinite(v) for v in coeffs.values()):
            raise ValueError("LP coefficients must be finite")
        self.rows.append((coeffs, sense, float(rhs)))

    def max_violation(self, x: np.ndarray) -> float:
        worst = max(0.0, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        for coeffs, sense, rhs in self.rows:
            lhs = sum(v * x[j] for j, v in coeffs.items())
            if sense == "<=":
                worst = max(worst, lhs - rhs)
            elif sense == ">=":
                worst = max(worst, rhs - lhs)
            else:
                worst = max(worst, abs(lhs - rhs))
        return worst


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None
    objective: float | None
    message: str = ""
    iterations: int = 0


def _matrix(rows, n_vars):
    r, c, v = [], [], []
    rhs = []
    for k, (coeffs, _, b) in enumerate(rows):
        for j, val in coeffs.items():
            r.append(k)
            c.append(j)
            v.append(val)
        rhs.append(b)
    return coo_matrix((v, (r, c)), shape=(len(rows), n_vars)).tocsr(), np.array(rhs)


def lp_solve(lp: LinearProgram, feasibility_tol: float = 1e-9) -> LPResult:
    """Solve with the HiGHS dual simplex; deterministic for identical input."""
    le = [row for row in lp.rows if row[1] == "<="]
    ge = [(({j: -v for j, v in c.items()}), "<=", -b) for c, s, b in lp.rows if s == ">="]
    eq = [row for row in lp.rows if row[1] == "="]
    A_ub, b_ub = _matrix(le + ge, lp.n_vars) if le or ge else (None, None)
    A_eq, b_eq = _matrix(eq, lp.n_vars) if eq else (None, None)
    bounds = [(None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi)
              for lo, hi in zip(lp.lower, lp.upper)]
    res = linprog(
        lp.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
        method="highs-ds",
        options={"primal_feasibility_tolerance": feasibility_tol,
                 "dual_feasibility_tolerance": feasibility_tol, "presolve": True},
    )
    status = {0: LPStatus.OPTIMAL, 2: LPStatus.INFEASIBLE, 3: LPStatus.UNBOUNDED}.get(
        res.status, LPStatus.NUMERICAL_FAILURE)
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, None, None, res.message, int(getattr(res, "nit", 0) or 0))
    return LPResult(status, np.asarray(res.x), float(res.fun), res.message, int(res.nit or 0))
