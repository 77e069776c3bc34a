"""Brute-force global solver for small instances.

Selected coordinates of ``u`` are enumerated on a grid. At each grid point the
lower level is solved exactly, then the upper level picks the most favorable
lower-level optimum (optimistic semantics) through a second LP that keeps
``e @ y`` within ``tol_lex`` of the lower-level optimal value.
"""

from __future__ import annotations

import itertools
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lp_core import LpProblem, LpStatus, solve_lp
from .model import materialize_X


@dataclass(frozen=True)
class Fixed:
    value: float


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float
    step: float

    def values(self):
        count = int(np.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return [self.lo + k * self.step for k in range(count)]


@dataclass(frozen=True)
class Free:
    pass


class GridError(ValueError):
    pass


class NoFeasiblePoint(RuntimeError):
    """No grid point admits a lower-level optimum satisfying the upper level."""


class UnboundedLowerLevel(RuntimeError):
    pass


@dataclass
class OracleResult:
    best_u: np.ndarray
    best_y: np.ndarray
    best_objective: float
    feasible_points: int
    evaluated_points: int


_ENTRY = re.compile(r"^u(\d+)=(.+)$")


def parse_grid(text, r):
    """Parse ``u<i>=<lo>:<hi>:<step>``, ``u<i>=<value>`` or ``u<i>=free`` entries.

    Every coordinate ``u0 .. u{r-1}`` must be given exactly once.
    """
    entries = {}
    for raw in text.split(","):
        item = raw.strip()
        if not item:
            continue
        match = _ENTRY.match(item)
        if not match:
            raise GridError(f"cannot parse grid entry '{item}'")
        i = int(match.group(1))
        if i >= r:
            raise GridError(f"coordinate u{i} out of range for r = {r}")
        if i in entries:
            raise GridError(f"coordinate u{i} given twice")
        text_i = match.group(2).strip()
        try:
            if text_i.lower() == "free":
                entries[i] = Free()
            elif ":" in text_i:
                parts = [float(s) for s in text_i.split(":")]
                if len(parts) != 3:
                    raise GridError(f"range for u{i} needs lo:hi:step")
                entries[i] = Range(*parts)
            else:
                entries[i] = Fixed(float(text_i))
        except ValueError as exc:
            if isinstance(exc, GridError):
                raise
            raise GridError(f"bad number in grid entry '{item}'") from exc
    missing = [f"u{i}" for i in range(r) if i not in entries]
    if missing:
        raise GridError("grid leaves coordinates unspecified: " + ", ".join(missing))
    return [entries[i] for i in range(r)]


def check_grid(inst, grid):
    if len(grid) != inst.r:
        raise GridError(f"grid has {len(grid)} entries, instance has r = {inst.r}")
    for i, g in enumerate(grid):
        if isinstance(g, Range):
            if not g.step > 0:
                raise GridError(f"u{i}: step must be positive")
            if g.lo > g.hi:
                raise GridError(f"u{i}: lo exceeds hi")
        elif isinstance(g, Free):
            if np.any(inst.P[:, i] != 0.0):
                raise GridError(f"u{i} cannot be free: it changes the lower-level matrix")


def _evaluate(inst, grid, point, tol_lex):
    """Optimistic upper-level value at one grid point, or None if infeasible."""
    free = [i for i, g in enumerate(grid) if isinstance(g, Free)]
    u = np.zeros(inst.r)
    pinned = [i for i in range(inst.r) if i not in free]
    u[pinned] = point
    M = inst.C + materialize_X(inst, u)

    lower = solve_lp(LpProblem.build(inst.e, G=M, h=inst.b))
    if lower.status is LpStatus.INFEASIBLE:
        return None
    if lower.status is LpStatus.UNBOUNDED:
        raise UnboundedLowerLevel(f"lower level unbounded at u = {u.tolist()}")
    v_star = lower.objective

    n, nf = inst.n, len(free)
    Af = inst.Au[:, free]
    G = np.block([
        [inst.B, Af],
        [M, np.zeros((inst.m, nf))],
        [-inst.e[None, :], np.zeros((1, nf))],
    ])
    h = np.concatenate([inst.a - inst.Au @ u, inst.b, [-(v_star + tol_lex)]])
    cost = np.concatenate([inst.d, inst.cu[free]])
    sol = solve_lp(LpProblem.build(cost, G=G, h=h))
    if sol.status is LpStatus.INFEASIBLE:
        return None
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedLowerLevel(f"optimistic upper level unbounded at u = {u.tolist()}")
    u[free] = sol.w[n:]
    y = sol.w[:n]
    return float(inst.cu @ u + inst.d @ y), u, y


def default_workers():
    env = os.environ.get("PALM_BILEVEL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_oracle(inst, grid, tol_lex=1e-7, workers=1):
    """Enumerate ``grid`` and return the best optimistic bilevel-feasible point.

    Ties in the objective go to the lexicographically smallest gridded
    coordinates, so the answer does not depend on evaluation order.

    Raises
    ------
    NoFeasiblePoint
        If no grid point is feasible.
    UnboundedLowerLevel
        If the lower level (or the optimistic selection) is unbounded anywhere.
    """
    check_grid(inst, grid)
    axes = []
    for g in grid:
        if isinstance(g, Range):
            axes.append(g.values())
        elif isinstance(g, Fixed):
            axes.append([g.value])
    points = list(itertools.product(*axes))

    def job(point):
        return point, _evaluate(inst, grid, np.array(point, dtype=float), tol_lex)

    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, points))
    else:
        outcomes = [job(pt) for pt in points]

    best = None
    feasible = 0
    for point, res in outcomes:
        if res is None:
            continue
        feasible += 1
        key = (res[0], point)
        if best is None or key < best[0]:
            best = (key, res)
    if best is None:
        raise NoFeasiblePoint(f"none of {len(points)} grid points is bilevel feasible")
    objective, u, y = best[1]
    return OracleResult(u, y, objective, feasible, len(points))
