"""Benchmark dispatch, ratio aggregation and seeded parameter sweeps."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import build_threat_meta_mdp, myopic_response, nosig_value, solve_mdp
from .errors import DegenerateRatio, InvalidSpec, PersuasionError, SweepFailure
from .evaluation import EvalResult, exact_eval
from .instances import RandomSpec, RoadNavSpec, gen_random, gen_roadnav
from .model import PersuasionMDP, uninformative
from .solver import full_control, myopic_prior_policy, nosig, opt_sig_myop, threat_strategy

METHOD_TAGS = ("nosig-myop", "nosig-fs", "optsig-myop", "optsig-am", "threat", "full-control")
COLUMNS = ("noSigMyop", "noSigFS", "optSigMyop", "optSigAM")
DAT_HEADER = "\t".join(("x",) + COLUMNS + tuple(f"StdDev_{c}" for c in COLUMNS))
FAMILIES = {"random": (RandomSpec, gen_random), "roadnav": (RoadNavSpec, gen_roadnav)}


def evaluate_method(mdp: PersuasionMDP, tag: str) -> EvalResult:
    """Principal and agent payoffs of one benchmark or signaling method."""
    if tag in ("nosig-myop", "nosig-fs"):
        report = nosig(mdp, "myopic" if tag == "nosig-myop" else "fs")
    elif tag == "optsig-myop":
        advice = opt_sig_myop(mdp).strategy
        return exact_eval(mdp, advice, myopic_response(mdp, advice), method=tag)
    elif tag in ("optsig-am", "threat"):
        # the far-sighted response to the threat is already verified to obey
        report = threat_strategy(mdp)[1]
    elif tag == "full-control":
        report = full_control(mdp)
    else:
        raise ValueError(f"unknown method tag {tag!r}; expected one of {', '.join(METHOD_TAGS)}")
    return EvalResult(report.principal_payoff, report.agent_payoff, tag)


def payoff_ratio(value: float, full: float, cost: bool) -> float:
    """Method payoff relative to full control, inverted when payoffs are costs."""
    if cost:
        if value >= 0 or full >= 0:
            raise DegenerateRatio(f"cost instance with non-negative payoff ({value}, {full})")
        return full / value
    if full == 0:
        raise DegenerateRatio("full-control payoff is zero")
    return value / full


def instance_ratios(mdp: PersuasionMDP, cost: bool) -> np.ndarray:
    full = evaluate_method(mdp, "full-control").principal
    tags = ("nosig-myop", "nosig-fs", "optsig-myop", "threat")
    return np.array([payoff_ratio(evaluate_method(mdp, t).principal, full, cost) for t in tags])


@dataclass
class SweepRow:
    x: float
    means: np.ndarray
    stds: np.ndarray
    n_instances: int
    flagged: list[int] = field(default_factory=list)
    ratios: np.ndarray | None = None

    def as_dict(self) -> dict[str, float]:
        out = {"x": self.x}
        out.update(zip(COLUMNS, map(float, self.means)))
        out.update((f"StdDev_{c}", float(v)) for c, v in zip(COLUMNS, self.stds))
        return out


def instance_seed(base_seed: int, point: int, instance: int) -> int:
    return base_seed + point * 1_000_000 + instance


def _job(args):
    family, params, cost = args
    spec_cls, gen = FAMILIES[family]
    try:
        return instance_ratios(gen(spec_cls(**params)), cost)
    except DegenerateRatio:
        return None
    except PersuasionError as exc:
        raise SweepFailure(f"{type(exc).__name__} at {params}: {exc}") from exc


def sweep(family: str, param: str, grid, fixed: dict | None = None, instances_per_point: int = 20,
          base_seed: int = 0, workers: int = 1) -> list[SweepRow]:
    """Average method/full-control ratios over seeded instances at each grid value.

    Instances whose ratio is undefined are skipped and their indices kept in
    ``SweepRow.flagged``. Output does not depend on ``workers``.
    """
    if family not in FAMILIES:
        raise InvalidSpec(f"unknown family {family!r}")
    grid = list(grid)
    if not grid:
        raise InvalidSpec("sweep grid is empty")
    if instances_per_point < 2:
        raise InvalidSpec("need at least two instances per point for a standard deviation")
    spec_cls, _ = FAMILIES[family]
    fixed = dict(fixed or {})
    if param not in spec_cls.__dataclass_fields__ or param == "seed":
        raise InvalidSpec(f"{family} instances have no parameter {param!r}")
    cost = family == "roadnav"

    jobs = []
    for p, x in enumerate(grid):
        for i in range(instances_per_point):
            params = {**fixed, param: x, "seed": instance_seed(base_seed, p, i)}
            spec_cls(**params).validate()
            jobs.append((family, params, cost))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_job(job) for job in jobs]

    rows = []
    for p, x in enumerate(grid):
        chunk = results[p * instances_per_point:(p + 1) * instances_per_point]
        flagged = [i for i, r in enumerate(chunk) if r is None]
        good = np.array([r for r in chunk if r is not None])
        if len(good) < 2:
            raise DegenerateRatio(f"grid point {param}={x}: fewer than two instances with defined ratios")
        rows.append(SweepRow(float(x), good.mean(axis=0), good.std(axis=0, ddof=1), len(good), flagged, good))
    return rows


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def format_dat(rows: list[SweepRow]) -> str:
    lines = [DAT_HEADER]
    for row in rows:
        values = [row.x, *row.means, *row.stds]
        lines.append("\t".join(_fmt(v) for v in values))
    return "\n".join(lines) + "\n"


def write_dat(rows: list[SweepRow], path) -> Path:
    path = Path(path)
    path.write_text(format_dat(rows))
    return path


def read_dat(path) -> list[dict[str, float]]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    return [dict(zip(header, map(float, line.split()))) for line in lines[1:] if line.strip()]


def beta_grid(step: float = 0.25) -> list[float]:
    n = int(round(2 / step))
    return [round(-1 + k * step, 12) for k in range(n + 1)]


def benchmark_defaults() -> dict:
    return {"n_states": 10, "n_actions": 10, "n_thetas": 10, "n_terminal": 5, "gamma": 0.8, "gamma_tilde": 0.8}



def method_policy(mdp: PersuasionMDP, tag: str):
    """Strategy and agent policy behind a signaling or no-signal method, for simulation."""
    if tag == "nosig-myop":
        return uninformative(mdp), myopic_prior_policy(mdp)
    if tag == "nosig-fs":
        return uninformative(mdp), nosig_value(mdp)[1]
    if tag == "optsig-myop":
        advice = opt_sig_myop(mdp).strategy
        return advice, myopic_response(mdp, advice)
    if tag in ("optsig-am", "threat"):
        threat = threat_strategy(mdp)[0]
        return threat, solve_mdp(build_threat_meta_mdp(mdp, threat))[1]
    raise ValueError(f"method {tag!r} has no signaling strategy to simulate")
