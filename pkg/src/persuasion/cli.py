"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 I/O failure, 4 computation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import experiments
from .errors import InvalidSpec, InvariantViolation, ParseError, PersuasionError
from .evaluation import exact_eval, rollout
from .instances import (
    RandomSpec,
    RoadNavSpec,
    gen_indset_gadget,
    gen_random,
    gen_roadnav,
    load_instance,
    read_graph,
    save_instance,
)
from .solver import METHODS, solve

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_COMPUTE = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _add_discounts(p, gamma=0.8, gamma_tilde=0.8):
    p.add_argument("--gamma", type=float, default=gamma, help="principal discount factor")
    p.add_argument("--gamma-tilde", type=float, default=gamma_tilde, help="agent discount factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="persuasion", description=__doc__.splitlines()[0],
                                     epilog="exit codes: 0 success, 2 usage, 3 I/O, 4 computation")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a generated instance to JSON")
    fam = gen.add_subparsers(dest="family", required=True)
    r = fam.add_parser("random", help="general random instance")
    r.add_argument("--states", type=int, default=10)
    r.add_argument("--actions", type=int, default=10)
    r.add_argument("--thetas", type=int, default=10)
    r.add_argument("--terminals", type=int, default=5)
    r.add_argument("--beta", type=float, default=0.0)
    _add_discounts(r)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--output", type=Path)
    rn = fam.add_parser("roadnav", help="road navigation on a random DAG")
    rn.add_argument("--nodes", type=int, default=20)
    rn.add_argument("--edges", type=int, default=100)
    rn.add_argument("--thetas", type=int, default=3)
    rn.add_argument("--beta", type=float, default=0.5)
    rn.add_argument("--uniform-congestion", action="store_true")
    _add_discounts(rn)
    rn.add_argument("--seed", type=int, default=0)
    rn.add_argument("-o", "--output", type=Path)
    ind = fam.add_parser("indset", help="independent-set gadget built from an edge-list graph")
    ind.add_argument("--graph", type=Path, required=True)
    _add_discounts(ind, gamma_tilde=0.4)
    ind.add_argument("-o", "--output", type=Path)

    sv = sub.add_parser("solve", help="compute a strategy and write a JSON report")
    sv.add_argument("instance", type=Path)
    sv.add_argument("--method", choices=METHODS, required=True)
    sv.add_argument("-o", "--output", type=Path)

    ev = sub.add_parser("evaluate", help="evaluate a method exactly or by simulation")
    ev.add_argument("instance", type=Path)
    ev.add_argument("--method", choices=experiments.METHOD_TAGS, required=True)
    ev.add_argument("--rollout", action="store_true", help="Monte Carlo estimate instead of exact")
    ev.add_argument("--samples", type=int, default=10_000)
    ev.add_argument("--horizon", type=int)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("-o", "--output", type=Path)

    ex = sub.add_parser("experiment", help="run a parameter sweep and write a .dat table")
    ex.add_argument("--family", choices=sorted(experiments.FAMILIES), default="random")
    ex.add_argument("--param", default="beta", help="spec field to sweep")
    ex.add_argument("--grid", type=float, nargs="+", help="grid values (default: beta from -1 to 1 by 0.25)")
    ex.add_argument("--set", dest="fixed", action="append", default=[], metavar="FIELD=VALUE",
                    help="override a fixed spec field, repeatable")
    ex.add_argument("--instances", type=int, default=20)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--workers", type=int, default=1, help="overridden by PERSUASION_THREADS")
    ex.add_argument("-o", "--output", type=Path, default=Path("sweep.dat"))
    return parser


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def cmd_generate(args) -> int:
    if args.family == "random":
        spec = RandomSpec(args.states, args.actions, args.thetas, args.terminals, args.beta,
                          args.gamma, args.gamma_tilde, args.seed)
        mdp, seed = gen_random(spec), args.seed
    elif args.family == "roadnav":
        spec = RoadNavSpec(args.nodes, args.edges, args.thetas, args.beta, args.gamma, args.gamma_tilde,
                           args.uniform_congestion, args.seed)
        mdp, seed = gen_roadnav(spec), args.seed
    else:
        gadget = gen_indset_gadget(read_graph(args.graph), args.gamma_tilde, args.gamma)
        mdp, seed = gadget.mdp, None
    out = args.output or Path(f"{args.family}" + (f"_seed{seed}" if seed is not None else "") + ".json")
    save_instance(mdp, out)
    print(f"wrote {out}: |S|={mdp.n_states} |A|={mdp.n_actions} |Theta|={mdp.n_thetas} seed={seed}")
    if args.family == "indset":
        mapping = out.with_suffix(".mapping.json")
        doc = {
            "vertices": gadget.graph.n,
            "edges": [list(e) for e in gadget.graph.edges],
            "entry": {str(v): s for v, s in gadget.entry.items()},
            "choice": {str(v): s for v, s in gadget.choice.items()},
            "exit": {str(v): s for v, s in gadget.exit.items()},
            "sink": gadget.sink,
        }
        _write(mapping, json.dumps(doc, indent=2) + "\n")
        print(f"wrote {mapping}")
    return EXIT_OK


def cmd_solve(args) -> int:
    mdp = load_instance(args.instance)
    report = solve(mdp, args.method)
    out = args.output or Path(f"{args.instance.stem}.{args.method}.json")
    _write(out, json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"{report.principal_payoff:.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    mdp = load_instance(args.instance)
    if args.rollout:
        if args.method == "full-control":
            raise UsageError("full-control has no signaling strategy to simulate")
        strategy, policy = experiments.method_policy(mdp, args.method)
        result = rollout(mdp, strategy, policy, horizon=args.horizon, n_samples=args.samples,
                         seed=args.seed, method=args.method)
        print(f"principal {result.principal:.6f} +- {result.principal_se:.6f}")
        print(f"agent {result.agent:.6f} +- {result.agent_se:.6f}")
    else:
        result = experiments.evaluate_method(mdp, args.method)
        print(f"principal {result.principal:.6f}")
        print(f"agent {result.agent:.6f}")
    if args.output:
        _write(args.output, json.dumps(asdict(result), indent=2) + "\n")
    return EXIT_OK


def _parse_fixed(items, spec_cls) -> dict:
    fields = spec_cls.__dataclass_fields__
    fixed = {}
    for item in items:
        key, sep, value = item.partition("=")
        key = key.replace("-", "_")
        if not sep or key not in fields or key == "seed":
            raise UsageError(f"bad --set {item!r}; fields: {', '.join(f for f in fields if f != 'seed')}")
        kind = fields[key].type
        try:
            if kind == "bool":
                fixed[key] = value.lower() in ("1", "true", "yes")
            else:
                fixed[key] = {"int": int, "float": float}[kind](value)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad value in --set {item!r}") from exc
    return fixed


def worker_count(flag: int) -> int:
    env = os.environ.get("PERSUASION_THREADS")
    if env:
        try:
            flag = int(env)
        except ValueError as exc:
            raise UsageError(f"PERSUASION_THREADS must be an integer, got {env!r}") from exc
    if flag < 1:
        raise UsageError("parallelism must be at least 1")
    return flag


def cmd_experiment(args) -> int:
    spec_cls = experiments.FAMILIES[args.family][0]
    fixed = experiments.benchmark_defaults() if args.family == "random" else {}
    fixed.update(_parse_fixed(args.fixed, spec_cls))
    param = args.param.replace("-", "_")
    grid = args.grid if args.grid else experiments.beta_grid()
    if param in ("n_states", "n_actions", "n_thetas", "n_terminal", "n_nodes", "n_edges"):
        if any(x != int(x) for x in grid):
            raise UsageError(f"{param} needs integer grid values")
        grid = [int(x) for x in grid]
    rows = experiments.sweep(args.family, param, grid, fixed, args.instances, args.seed,
                             worker_count(args.workers))
    _write(args.output, experiments.format_dat(rows))
    flagged = sum(len(r.flagged) for r in rows)
    print(f"wrote {args.output}: {len(rows)} rows" + (f", {flagged} flagged instances skipped" if flagged else ""))
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "evaluate": cmd_evaluate, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidSpec) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, InvariantViolation) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PersuasionError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"computation failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
