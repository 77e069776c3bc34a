"""The linear programs solved by the penalty method.

Variable layouts:

* initialization problem: ``(y, lam)``
* primal subproblem: ``y``
* dual subproblem: ``lam``
* master problem: ``(du, y, lam)``

``y`` and ``du`` are free, ``lam >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp_core import LpProblem
from .model import materialize_X, step_matrix


@dataclass
class Iterate:
    u_bar: np.ndarray
    y_bar: np.ndarray
    lambda_bar: np.ndarray

    def copy(self):
        return Iterate(self.u_bar.copy(), self.y_bar.copy(), self.lambda_bar.copy())


class MasterInfeasible(RuntimeError):
    """A subproblem built at the current iterate has no usable optimum."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


def master_slices(inst):
    """Slices of ``du``, ``y`` and ``lam`` inside the master variable vector."""
    r, n, m = inst.r, inst.n, inst.m
    return slice(0, r), slice(r, r + n), slice(r + n, r + n + m)


def _fixed_u_problem(inst, u, cost_y, cost_lam):
    """Upper, primal and dual rows with u held fixed; variables ``(y, lam)``."""
    m, n, p = inst.m, inst.n, inst.p
    u = np.asarray(u, dtype=float)
    M = inst.C + materialize_X(inst, u)
    G = np.block([
        [inst.B, np.zeros((p, m))],
        [M, np.zeros((m, m))],
    ])
    h = np.concatenate([inst.a - inst.Au @ u, inst.b])
    H = np.hstack([np.zeros((n, n)), M.T])
    lb = np.concatenate([np.full(n, -np.inf), np.zeros(m)])
    return LpProblem(np.concatenate([cost_y, cost_lam]), G, h, H, inst.e, lb)


def build_init_problem(inst, u0):
    """Minimize the lower-level duality gap ``e @ y - b @ lam`` with u fixed at ``u0``."""
    return _fixed_u_problem(inst, u0, inst.e, -inst.b)


def build_subproblem_primal(inst, u_bar, mu):
    """Upper-level and lower-level primal rows at fixed u, cost ``(d + mu e) @ y``."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    u_bar = np.asarray(u_bar, dtype=float)
    M = inst.C + materialize_X(inst, u_bar)
    G = np.vstack([inst.B, M])
    h = np.concatenate([inst.a - inst.Au @ u_bar, inst.b])
    return LpProblem.build(inst.d + mu * inst.e, G=G, h=h)


def build_subproblem_dual(inst, u_bar):
    """Lower-level dual at fixed u, written as ``min -b @ lam``."""
    M = inst.C + materialize_X(inst, u_bar)
    return LpProblem.build(-inst.b, H=M.T, k=inst.e, lower_bounds=np.zeros(inst.m))


def linearize_expansion(X_bar, y_bar, dX, dy):
    """Split ``(X_bar + dX) @ (y_bar + dy)`` into its first-order part and the dropped term.

    Returns
    -------
    exact, approx, dropped : ndarray
        ``exact == approx + dropped`` where ``approx = X_bar @ y + dX @ y_bar``
        with ``y = y_bar + dy``, and ``dropped = dX @ dy``.
    """
    X_bar, dX = np.asarray(X_bar, dtype=float), np.asarray(dX, dtype=float)
    y_bar, dy = np.asarray(y_bar, dtype=float), np.asarray(dy, dtype=float)
    y = y_bar + dy
    exact = (X_bar + dX) @ y
    approx = X_bar @ y + dX @ y_bar
    dropped = dX @ dy
    return exact, approx, dropped


def _step_jacobians(inst, y_bar, lambda_bar):
    """Linear maps du -> mat(P du) @ y_bar and du -> mat(P du).T @ lambda_bar."""
    m, n, r = inst.m, inst.n, inst.r
    Jy = np.zeros((m, r))
    Jl = np.zeros((n, r))
    for k in range(r):
        Dk = step_matrix(inst, np.eye(r)[k])
        Jy[:, k] = Dk @ y_bar
        Jl[:, k] = Dk.T @ lambda_bar
    return Jy, Jl


def build_master_lp(inst, iterate, mu):
    """Penalized problem with the bilinear terms linearized around ``iterate``.

    Rows, in order: upper-level rows at ``u_bar + du``; linearized primal rows
    ``(C + X_bar) y + dX y_bar >= b``; linearized dual rows
    ``(C + X_bar).T lam + dX.T lam_bar == e``. The objective is
    ``cu @ (u_bar + du) + d @ y + mu (e @ y - b @ lam)``; the constant
    ``cu @ u_bar`` is dropped from the cost vector.
    """
    m, n, p, r = inst.m, inst.n, inst.p, inst.r
    u_bar = np.asarray(iterate.u_bar, dtype=float)
    y_bar = np.asarray(iterate.y_bar, dtype=float)
    lam_bar = np.asarray(iterate.lambda_bar, dtype=float)
    M = inst.C + materialize_X(inst, u_bar)
    Jy, Jl = _step_jacobians(inst, y_bar, lam_bar)

    cost = np.concatenate([inst.cu, inst.d + mu * inst.e, -mu * inst.b])
    G = np.block([
        [inst.Au, inst.B, np.zeros((p, m))],
        [Jy, M, np.zeros((m, m))],
    ])
    h = np.concatenate([inst.a - inst.Au @ u_bar, inst.b])
    H = np.hstack([Jl, np.zeros((n, n)), M.T])
    lb = np.concatenate([np.full(r + n, -np.inf), np.zeros(m)])
    return LpProblem(cost, G, h, H, inst.e, lb)


def build_penalized_fixed(inst, u_bar, mu):
    """Penalized single-level problem with u fixed; variables ``(y, lam)``.

    This is what the master problem reduces to when ``du`` is pinned to zero.
    """
    return _fixed_u_problem(inst, u_bar, inst.d + mu * inst.e, -mu * inst.b)
