"""Command-line interface: ``palm-bilevel solve|oracle|example``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .lp_core import NumericalFailure
from .model import InstanceError, dumps_instance, example_instance, load_instance
from .oracle import (
    GridError,
    NoFeasiblePoint,
    UnboundedLowerLevel,
    default_workers,
    parse_grid,
    run_oracle,
)
from .palm import PalmConfig, PalmStatus, run_palm, write_trace_csv

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAX_OUTER = 2
EXIT_FAILURE = 3
EXIT_NO_FEASIBLE = 4

PALM_EXIT = {
    PalmStatus.CONVERGED: EXIT_OK,
    PalmStatus.MAX_OUTER_EXCEEDED: EXIT_MAX_OUTER,
    PalmStatus.MASTER_INFEASIBLE: EXIT_FAILURE,
    PalmStatus.NUMERICAL_FAILURE: EXIT_FAILURE,
}


@dataclass
class RunReport:
    instance: str
    mode: str
    status: str
    objective: float | None = None
    u: list | None = None
    y: list | None = None
    lam: list | None = None
    gap: float | None = None
    wall_time: float = 0.0
    files: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self):
        data = {}
        for key, value in asdict(self).items():
            if key == "extra":
                data.update(value)
            else:
                data["lambda" if key == "lam" else key] = value
        return json.dumps(data, indent=2, allow_nan=False, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite_or_none(x):
    return float(x) if x is not None and np.isfinite(x) else None


def _load(path):
    try:
        return load_instance(path)
    except json.JSONDecodeError as exc:
        print(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}", file=sys.stderr)
    except InstanceError as exc:
        print(f"{path}: invalid instance:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
    except OSError as exc:
        print(f"{path}: {exc.strerror or exc}", file=sys.stderr)
    return None


def _parse_vector(text):
    return np.array([float(s) for s in text.split(",") if s.strip()], dtype=float)


def cmd_solve(args):
    inst = _load(args.instance)
    if inst is None:
        return EXIT_INPUT
    try:
        u0 = _parse_vector(args.u0) if args.u0 else None
        if u0 is not None and u0.shape != (inst.r,):
            raise ValueError(f"--u0 needs {inst.r} values, got {u0.size}")
        cfg = PalmConfig(mu0=args.mu0, growth=args.growth, eps_opt=args.eps_opt,
                         eps_apx=args.eps_apx, max_outer=args.max_outer,
                         max_inner=args.max_inner, u0=u0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    start = time.perf_counter()
    result = run_palm(inst, cfg)
    elapsed = time.perf_counter() - start
    if result.detail:
        print(f"{result.status.value}: {result.detail}", file=sys.stderr)

    files = []
    if args.trace:
        try:
            with open(args.trace, "w", newline="") as fh:
                write_trace_csv(result.trace, fh, inst.r, inst.n)
            files.append(args.trace)
        except OSError as exc:
            print(f"cannot write trace {args.trace}: {exc}", file=sys.stderr)
            return EXIT_INPUT

    it = result.iterate
    report = RunReport(
        instance=inst.name, mode="palm", status=result.status.value,
        objective=_finite_or_none(result.upper_objective(inst)),
        u=None if it is None else it.u_bar.tolist(),
        y=None if it is None else it.y_bar.tolist(),
        lam=None if it is None else it.lambda_bar.tolist(),
        gap=_finite_or_none(result.gap), wall_time=elapsed, files=files,
        extra={"certified": result.certified,
               "outer_iterations": result.outer_iterations,
               "inner_iterations": len(result.trace),
               "mu": _finite_or_none(result.mu),
               "detail": result.detail},
    )
    print(report.to_json())
    return PALM_EXIT[result.status]


def cmd_oracle(args):
    inst = _load(args.instance)
    if inst is None:
        return EXIT_INPUT
    try:
        grid = parse_grid(args.grid, inst.r)
    except GridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    workers = args.threads if args.threads else default_workers()
    start = time.perf_counter()
    try:
        res = run_oracle(inst, grid, tol_lex=args.tol_lex, workers=workers)
    except GridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoFeasiblePoint as exc:
        print(f"NoFeasiblePoint: {exc}", file=sys.stderr)
        report = RunReport(instance=inst.name, mode="oracle", status="NoFeasiblePoint",
                           wall_time=time.perf_counter() - start)
        print(report.to_json())
        return EXIT_NO_FEASIBLE
    except (UnboundedLowerLevel, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    report = RunReport(
        instance=inst.name, mode="oracle", status="Optimal",
        objective=res.best_objective, u=res.best_u.tolist(), y=res.best_y.tolist(),
        wall_time=time.perf_counter() - start,
        extra={"feasible_points": res.feasible_points,
               "evaluated_points": res.evaluated_points},
    )
    print(report.to_json())
    return EXIT_OK


def cmd_example(args):
    text = dumps_instance(example_instance()) + "\n"
    if args.out and args.out != "-":
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    defaults = PalmConfig()
    parser = argparse.ArgumentParser(
        prog="palm-bilevel",
        description="Penalty adaptive linearization for bilevel programs with bilinear lower levels.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the penalty method on an instance")
    p.add_argument("instance")
    p.add_argument("--mu0", type=float, default=defaults.mu0)
    p.add_argument("--growth", type=float, default=defaults.growth)
    p.add_argument("--eps-opt", type=float, default=defaults.eps_opt)
    p.add_argument("--eps-apx", type=float, default=defaults.eps_apx)
    p.add_argument("--max-outer", type=int, default=defaults.max_outer)
    p.add_argument("--max-inner", type=int, default=defaults.max_inner)
    p.add_argument("--u0", help="comma-separated initial upper-level vector")
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="grid-search the global optimum")
    p.add_argument("instance")
    p.add_argument("--grid", required=True,
                   help="e.g. 'u0=-0.5:0.5:0.001,u1=free'")
    p.add_argument("--tol-lex", type=float, default=1e-7)
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (default: PALM_BILEVEL_THREADS or all cores)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("example", help="print the built-in two-variable example")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
