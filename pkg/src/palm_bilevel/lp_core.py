"""Dense two-phase simplex with dual values, and closest-optimum reselection.

Problems are stated as::

    min  cost @ w
    s.t. G @ w >= h
         H @ w == k
         w[j] >= 0   where lower_bounds[j] == 0, free where it is -inf

The solver is a textbook two-phase method on the standard form
``A z = b, z >= 0`` (free variables split, inequality rows given surplus
columns). The basis matrix is refactored from scratch at every iteration,
which is affordable at desk scale and keeps iterates accurate. Pricing uses
the most negative reduced cost and falls back to Bland's rule while pivots
are degenerate, so runs are deterministic and cannot cycle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

TOL_FEAS = 1e-8
TOL_DUAL = 1e-6
TOL_FIX = 1e-7
PIVOT_TOL = 1e-9
PIVOT_FLOOR = 1e-11


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class NumericalFailure(RuntimeError):
    """The simplex method could not continue reliably."""


@dataclass
class LpProblem:
    cost: np.ndarray
    G: np.ndarray
    h: np.ndarray
    H: np.ndarray
    k: np.ndarray
    lower_bounds: np.ndarray

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).reshape(-1)
        nvars = self.cost.shape[0]
        self.G = np.asarray(self.G, dtype=float).reshape(-1, nvars)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        self.H = np.asarray(self.H, dtype=float).reshape(-1, nvars)
        self.k = np.asarray(self.k, dtype=float).reshape(-1)
        self.lower_bounds = np.asarray(self.lower_bounds, dtype=float).reshape(-1)

    @property
    def nvars(self):
        return self.cost.shape[0]

    @classmethod
    def build(cls, cost, G=None, h=None, H=None, k=None, lower_bounds=None):
        """Convenience constructor; omitted blocks are empty, variables default to free."""
        cost = np.asarray(cost, dtype=float).reshape(-1)
        nv = cost.shape[0]
        G = np.zeros((0, nv)) if G is None else G
        h = np.zeros(0) if h is None else h
        H = np.zeros((0, nv)) if H is None else H
        k = np.zeros(0) if k is None else k
        lb = np.full(nv, -np.inf) if lower_bounds is None else lower_bounds
        return cls(cost, G, h, H, k, lb)

    def validate(self):
        out = []
        nv = self.nvars
        if self.G.shape != (self.h.shape[0], nv):
            out.append(f"G has shape {self.G.shape}, expected ({self.h.shape[0]}, {nv})")
        if self.H.shape != (self.k.shape[0], nv):
            out.append(f"H has shape {self.H.shape}, expected ({self.k.shape[0]}, {nv})")
        if self.lower_bounds.shape != (nv,):
            out.append("lower_bounds length differs from variable count")
        else:
            ok = (self.lower_bounds == 0.0) | (self.lower_bounds == -np.inf)
            if not ok.all():
                out.append("every lower bound must be 0 or -inf")
        for name in ("cost", "G", "h", "H", "k"):
            if not np.isfinite(getattr(self, name)).all():
                out.append(f"non-finite entry in {name}")
        return out


@dataclass
class LpSolution:
    status: LpStatus
    w: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL

    def ineq_duals(self, lp):
        return self.duals[: lp.G.shape[0]]

    def eq_duals(self, lp):
        return self.duals[lp.G.shape[0]:]


@dataclass
class _StandardForm:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    row_scale: np.ndarray
    free: np.ndarray
    n_ineq: int
    nvars: int


def _standard_form(lp):
    nv = lp.nvars
    free = np.flatnonzero(lp.lower_bounds == -np.inf)
    n_ineq, n_eq = lp.G.shape[0], lp.H.shape[0]
    rows = n_ineq + n_eq
    ncols = nv + free.size + n_ineq
    A = np.zeros((rows, ncols))
    A[:n_ineq, :nv] = lp.G
    A[n_ineq:, :nv] = lp.H
    A[:, nv:nv + free.size] = -A[:, free]
    A[:n_ineq, nv + free.size:] = -np.eye(n_ineq)
    b = np.concatenate([lp.h, lp.k])
    c = np.concatenate([lp.cost, -lp.cost[free], np.zeros(n_ineq)])
    # equilibrate rows and make every right-hand side non-negative
    norms = np.max(np.abs(A), axis=1, initial=0.0)
    scale = np.where(b < 0, -1.0, 1.0) / np.where(norms > 0, norms, 1.0)
    A *= scale[:, None]
    b = b * scale
    return _StandardForm(A, b, c, scale, free, n_ineq, nv)


def _simplex(A, b, c, basis, max_iter):
    """Run primal simplex from a feasible basis. Returns (status, basis, iterations)."""
    m, ncols = A.shape
    basis = list(basis)
    cscale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    tol_rc = 1e-9 * cscale
    bland = False
    for it in range(max_iter):
        if m == 0:
            nonbasic_neg = np.flatnonzero(c < -tol_rc)
            return ("unbounded" if nonbasic_neg.size else "optimal"), basis, it
        B = A[:, basis]
        try:
            xB = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis matrix") from exc
        rc = c - A.T @ y
        rc[basis] = 0.0
        candidates = np.flatnonzero(rc < -tol_rc)
        if candidates.size == 0:
            return "optimal", basis, it
        j = int(candidates[0]) if bland else int(np.argmin(rc))
        try:
            direction = np.linalg.solve(B, A[:, j])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis matrix") from exc
        rows = np.flatnonzero(direction > PIVOT_TOL)
        if rows.size == 0:
            if np.any(direction > PIVOT_FLOOR):
                raise NumericalFailure(f"only tiny pivots available in column {j}")
            return "unbounded", basis, it
        ratios = np.maximum(xB[rows], 0.0) / direction[rows]
        theta = ratios.min()
        ties = rows[ratios <= theta + 1e-12 * max(1.0, theta)]
        if bland:
            leave = min(ties, key=lambda i: basis[i])
        else:
            leave = ties[np.argmax(direction[ties])]
        basis[int(leave)] = j
        bland = theta <= 1e-12
    raise NumericalFailure(f"simplex iteration limit ({max_iter}) reached")


def solve_lp(lp, max_iter=None):
    """Solve ``lp`` by the two-phase simplex method.

    Infeasible and unbounded problems are reported through
    ``LpSolution.status``. Raises :class:`NumericalFailure` on breakdown.
    Dual values are ordered as the inequality rows followed by the equality
    rows; inequality duals are non-negative at optimality.
    """
    sf = _standard_form(lp)
    A, b, c = sf.A, sf.b, sf.c
    m, ncols = A.shape
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 100

    # phase 1: one artificial per row
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(ncols), np.ones(m)])
    status, basis, it1 = _simplex(A1, b, c1, range(ncols, ncols + m), max_iter)
    if status != "optimal":
        raise NumericalFailure("phase 1 reported unbounded")
    xB = np.linalg.solve(A1[:, basis], b) if m else np.zeros(0)
    bscale = max(1.0, float(np.max(np.abs(b)))) if m else 1.0
    if m and float(xB[np.array(basis) >= ncols].sum()) > 1e-9 * bscale:
        return LpSolution(LpStatus.INFEASIBLE, iterations=it1)

    # drive artificials out of the basis, dropping redundant rows
    keep_rows = list(range(m))
    pos = 0
    while pos < len(basis):
        col = basis[pos]
        if col < ncols:
            pos += 1
            continue
        Ab = A1[np.ix_(keep_rows, basis)]
        row = np.linalg.solve(Ab.T, np.eye(len(basis))[pos]) @ A[keep_rows, :]
        row[[bc for bc in basis if bc < ncols]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > PIVOT_TOL:
            basis[pos] = j
            pos += 1
        else:
            keep_rows.remove(col - ncols)
            del basis[pos]
    A2 = A[keep_rows]
    b2 = b[keep_rows]

    status, basis, it2 = _simplex(A2, b2, c, basis, max_iter)
    iterations = it1 + it2
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=iterations)

    z = np.zeros(ncols)
    y_kept = np.zeros(len(keep_rows))
    if basis:
        B = A2[:, basis]
        z[basis] = np.maximum(np.linalg.solve(B, b2), 0.0)
        y_kept = np.linalg.solve(B.T, c[basis])
    y = np.zeros(m)
    y[keep_rows] = y_kept
    duals = y * sf.row_scale

    nv = sf.nvars
    w = z[:nv].copy()
    w[sf.free] -= z[nv:nv + sf.free.size]
    return LpSolution(LpStatus.OPTIMAL, w=w, objective=float(lp.cost @ w),
                      duals=duals, iterations=iterations)


def solve_closest(lp, prev, index=None, tol_fix=TOL_FIX):
    """Among optimal solutions of ``lp``, pick one nearest ``prev`` in the 1-norm.

    The optimal value ``v*`` is found first; then ``sum |w_i - prev_i|``
    over ``index`` (all variables by default) is minimized subject to the
    original constraints and ``cost @ w <= v* + tol_fix``. Non-optimal
    statuses of the first solve are returned unchanged.

    The returned duals are those of the plain solve; they remain optimal for
    every primal optimum.
    """
    base = solve_lp(lp)
    if not base.optimal:
        return base
    nv = lp.nvars
    prev = np.asarray(prev, dtype=float).reshape(-1)
    if prev.shape[0] != nv:
        raise ValueError(f"prev has length {prev.shape[0]}, expected {nv}")
    idx = np.arange(nv) if index is None else np.asarray(index, dtype=int).reshape(-1)
    q = idx.size
    v_star = base.objective
    # stay strictly inside the tol_fix band despite rounding in the final basis solve
    tol = max(0.9 * tol_fix, 1e-14 * abs(v_star))

    E = np.zeros((q, nv))
    E[np.arange(q), idx] = 1.0
    I = np.eye(q)
    G2 = np.block([
        [lp.G, np.zeros((lp.G.shape[0], q))],
        [-lp.cost[None, :], np.zeros((1, q))],
        [-E, I],
        [E, I],
    ])
    h2 = np.concatenate([lp.h, [-(v_star + tol)], -prev[idx], prev[idx]])
    H2 = np.hstack([lp.H, np.zeros((lp.H.shape[0], q))])
    cost2 = np.concatenate([np.zeros(nv), np.ones(q)])
    lb2 = np.concatenate([lp.lower_bounds, np.zeros(q)])
    stage2 = solve_lp(LpProblem(cost2, G2, h2, H2, lp.k, lb2))
    if not stage2.optimal:
        raise NumericalFailure(
            f"closest-optimum stage returned {stage2.status.value}; check tol_fix")
    w = stage2.w[:nv]
    return LpSolution(LpStatus.OPTIMAL, w=w, objective=float(lp.cost @ w),
                      duals=base.duals, iterations=base.iterations + stage2.iterations)


def dual_objective(lp, sol):
    return float(lp.h @ sol.ineq_duals(lp) + lp.k @ sol.eq_duals(lp))


def format_lp(lp):
    """Human-readable listing of an LP, one constraint per line."""

    def terms(coefs):
        parts = [f"{c:+.17g}*w{j}" for j, c in enumerate(coefs) if c != 0.0]
        return " ".join(parts) if parts else "0"

    lines = [f"min {terms(lp.cost)}"]
    for i in range(lp.G.shape[0]):
        lines.append(f"g{i}: {terms(lp.G[i])} >= {lp.h[i]:.17g}")
    for i in range(lp.H.shape[0]):
        lines.append(f"e{i}: {terms(lp.H[i])} == {lp.k[i]:.17g}")
    for j, lb in enumerate(lp.lower_bounds):
        lines.append(f"w{j} free" if lb == -np.inf else f"w{j} >= 0")
    return "\n".join(lines)
