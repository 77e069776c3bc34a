"""Penalty adaptive linearization for bilinear bilevel programs.

The outer loop raises the penalty weight ``mu`` on the lower-level duality
gap until the gap closes. The inner loop alternates between

1. re-solving the exact primal and dual subproblems at the current ``u``,
   keeping the optimum closest to the previous one, and
2. solving the linearized master problem for the smallest step ``du``,

until the step is negligible.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .lp_core import LpStatus, NumericalFailure, TOL_FEAS, solve_closest, solve_lp
from .model import materialize_X
from .reformulation import (
    Iterate,
    MasterInfeasible,
    build_init_problem,
    build_master_lp,
    build_subproblem_dual,
    build_subproblem_primal,
    master_slices,
)

log = logging.getLogger(__name__)


class PalmStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_OUTER_EXCEEDED = "MaxOuterExceeded"
    MASTER_INFEASIBLE = "MasterInfeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class PalmConfig:
    mu0: float = 1.0
    growth: float = 2.0
    eps_opt: float = 1e-6
    eps_apx: float = 1e-6
    max_outer: int = 60
    max_inner: int = 100
    u0: np.ndarray | None = None

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.growth > 1:
            raise ValueError("growth must exceed 1")
        if not (self.eps_opt > 0 and self.eps_apx > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be at least 1")

    def mu_at(self, outer_i):
        return self.mu0 * self.growth ** outer_i


@dataclass
class TraceRecord:
    """One inner iteration.

    ``u_bar`` is the linearization point: the ``u`` at which ``y_bar`` and
    ``lambda_bar`` were re-solved. The step taken from it has infinity norm
    ``dx_inf`` (measured on ``P @ du``).
    """

    outer_i: int
    inner_j: int
    mu: float
    gap: float
    dx_inf: float
    u_bar: np.ndarray
    y_bar: np.ndarray
    lambda_bar: np.ndarray
    upper_objective: float
    inner_cap_hit: bool = False


@dataclass
class PalmState:
    iterate: Iterate
    mu: float
    outer_i: int = 0
    inner_j: int = 0
    last_dx_inf: float = float("inf")
    gap: float = float("inf")


@dataclass
class PalmResult:
    """Outcome of :func:`run_palm`.

    ``iterate`` is the certified point: ``y_bar`` and ``lambda_bar`` solve
    the exact subproblems at ``u_bar`` and ``gap`` is their duality gap.
    ``u_last`` additionally includes the final (sub-tolerance) master step.
    When the run did not converge, ``iterate`` is the smallest-gap point seen
    and ``certified`` is False.
    """

    status: PalmStatus
    iterate: Iterate | None
    gap: float
    trace: list = field(default_factory=list)
    u_last: np.ndarray | None = None
    mu: float = float("nan")
    outer_iterations: int = 0
    certified: bool = False
    detail: str = ""

    def upper_objective(self, inst):
        if self.iterate is None:
            return float("nan")
        return upper_objective(inst, self.iterate)


def upper_objective(inst, iterate):
    return float(inst.cu @ iterate.u_bar + inst.d @ iterate.y_bar)


def _closest(lp, prev, what, iterate, index=None):
    sol = solve_closest(lp, prev, index=index)
    if sol.status is not LpStatus.OPTIMAL:
        raise MasterInfeasible(f"{what} is {sol.status.value}", iterate)
    return sol.w


def run_palm(inst, cfg=None):
    """Run the penalty adaptive linearization method on ``inst``.

    Never raises for algorithmic outcomes: failures are reported through
    ``PalmResult.status`` with whatever trace was produced.
    """
    cfg = PalmConfig() if cfg is None else cfg
    r, n = inst.r, inst.n
    u = np.zeros(r) if cfg.u0 is None else np.asarray(cfg.u0, dtype=float).copy()
    if u.shape != (r,):
        raise ValueError(f"u0 has shape {u.shape}, expected ({r},)")

    try:
        init = solve_lp(build_init_problem(inst, u))
    except NumericalFailure as exc:
        return PalmResult(PalmStatus.NUMERICAL_FAILURE, None, float("nan"),
                          detail=f"initialization: {exc}")
    if init.status is not LpStatus.OPTIMAL:
        return PalmResult(PalmStatus.NUMERICAL_FAILURE, None, float("nan"),
                          detail=f"no feasible primal-dual pair at u0 "
                                 f"(initialization problem {init.status.value})")

    state = PalmState(Iterate(u, init.w[:n].copy(), init.w[n:].copy()), cfg.mu0)
    du_slice, _, _ = master_slices(inst)
    trace = []
    certified = None
    best = None

    def finish(status, detail=""):
        if status is PalmStatus.CONVERGED:
            point, ok = certified, True
        else:
            point, ok = (best[1] if best else None), False
        return PalmResult(
            status, point, best[0] if (best and not ok) else state.gap, trace,
            u_last=state.iterate.u_bar.copy(), mu=state.mu,
            outer_iterations=state.outer_i, certified=ok, detail=detail)

    try:
        while state.outer_i == 0 or state.gap > cfg.eps_opt:
            if state.outer_i >= cfg.max_outer:
                return finish(PalmStatus.MAX_OUTER_EXCEEDED,
                              f"duality gap {state.gap:.3g} after {cfg.max_outer} outer iterations")
            state.mu = cfg.mu_at(state.outer_i)
            state.inner_j = 0
            it = state.iterate
            while state.inner_j == 0 or state.last_dx_inf > cfg.eps_apx:
                if state.inner_j >= cfg.max_inner:
                    trace[-1].inner_cap_hit = True
                    log.warning("inner loop cap hit at outer iteration %d", state.outer_i)
                    break
                it.y_bar = _closest(build_subproblem_primal(inst, it.u_bar, state.mu),
                                    it.y_bar, "primal subproblem", it)
                it.lambda_bar = _closest(build_subproblem_dual(inst, it.u_bar),
                                         it.lambda_bar, "dual subproblem", it)
                state.gap = float(inst.e @ it.y_bar - inst.b @ it.lambda_bar)
                certified = it.copy()
                if best is None or state.gap < best[0]:
                    best = (state.gap, certified)

                master = build_master_lp(inst, it, state.mu)
                w = _closest(master, np.zeros(master.nvars), "master problem", it,
                             index=np.arange(r)[du_slice])
                du = w[du_slice]
                state.last_dx_inf = float(np.max(np.abs(inst.P @ du), initial=0.0))
                trace.append(TraceRecord(
                    state.outer_i, state.inner_j, state.mu, state.gap, state.last_dx_inf,
                    it.u_bar.copy(), it.y_bar.copy(), it.lambda_bar.copy(),
                    upper_objective(inst, it)))
                log.debug("outer %d inner %d mu %g gap %.3e dx %.3e", state.outer_i,
                          state.inner_j, state.mu, state.gap, state.last_dx_inf)
                it.u_bar = it.u_bar + du
                state.inner_j += 1
            state.outer_i += 1
    except MasterInfeasible as exc:
        return finish(PalmStatus.MASTER_INFEASIBLE, str(exc))
    except NumericalFailure as exc:
        return finish(PalmStatus.NUMERICAL_FAILURE, str(exc))
    return finish(PalmStatus.CONVERGED)


@dataclass
class FeasibilityReport:
    primal_violation: float
    dual_violation: float
    upper_violation: float
    gap: float
    tol: float = TOL_FEAS

    @property
    def feasible(self):
        worst = max(self.primal_violation, self.dual_violation, self.upper_violation)
        return worst <= self.tol


def check_bilevel_feasibility(inst, iterate, tol=TOL_FEAS):
    """Evaluate the exact, non-linearized constraints at ``iterate``.

    The dual violation covers both the equality rows and negative multipliers.
    """
    u = np.asarray(iterate.u_bar, dtype=float)
    y = np.asarray(iterate.y_bar, dtype=float)
    lam = np.asarray(iterate.lambda_bar, dtype=float)
    M = inst.C + materialize_X(inst, u)
    primal = np.max(inst.b - M @ y, initial=0.0)
    dual = max(np.max(np.abs(M.T @ lam - inst.e), initial=0.0),
               np.max(-lam, initial=0.0))
    upper = np.max(inst.a - inst.Au @ u - inst.B @ y, initial=0.0)
    gap = float(inst.e @ y - inst.b @ lam)
    return FeasibilityReport(float(primal), float(dual), float(upper), gap, tol)


def trace_header(r, n):
    return (["outer_i", "inner_j", "mu", "gap", "dx_inf", "upper_obj"]
            + [f"u{i}" for i in range(r)] + [f"y{i}" for i in range(n)])


def write_trace_csv(trace, fh, r, n):
    """Write one row per inner iteration; floats with 17 significant digits."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(trace_header(r, n))
    for rec in trace:
        floats = [rec.mu, rec.gap, rec.dx_inf, rec.upper_objective, *rec.u_bar, *rec.y_bar]
        writer.writerow([rec.outer_i, rec.inner_j] + [f"{v:.17g}" for v in floats])
