import numpy as np
import pytest

from palm_bilevel.lp_core import (
    LpProblem,
    LpStatus,
    dual_objective,
    format_lp,
    solve_closest,
    solve_lp,
)

from vertex_oracle import brute_force_lp, brute_force_min


def random_lp(rng, max_vars=8, max_rows=8):
    """Random LP that is feasible and bounded by construction.

    A feasible point fixes the right-hand sides; a dual-feasible multiplier
    set fixes the cost.
    """
    nv = int(rng.integers(1, max_vars + 1))
    n_ineq = int(rng.integers(0, max_rows + 1))
    n_eq = int(rng.integers(0, min(nv, max_rows - n_ineq) + 1))
    lb = np.where(rng.random(nv) < 0.5, 0.0, -np.inf)
    G = rng.normal(size=(n_ineq, nv))
    H = rng.normal(size=(n_eq, nv))
    w0 = rng.normal(size=nv)
    w0[lb == 0] = np.abs(w0[lb == 0])
    h = G @ w0 - rng.exponential(size=n_ineq) * (rng.random(n_ineq) < 0.7)
    k = H @ w0
    y0 = rng.exponential(size=n_ineq)
    z0 = rng.normal(size=n_eq)
    slack = rng.exponential(size=nv) * (lb == 0)
    cost = G.T @ y0 + H.T @ z0 + slack
    return LpProblem(cost, G, h, H, k, lb)


def test_lower_level_example():
    lp = LpProblem.build([1, 1], G=[[0.5, 1], [1, 0.5]], h=[3, 3], lower_bounds=[0, 0])
    sol = solve_lp(lp)
    assert sol.status is LpStatus.OPTIMAL
    np.testing.assert_allclose(sol.w, [2, 2], atol=1e-12)
    assert sol.objective == pytest.approx(4.0, abs=1e-12)
    assert dual_objective(lp, sol) == pytest.approx(4.0, abs=1e-12)


def test_infeasible():
    sol = solve_lp(LpProblem.build([0.0], G=[[1.0], [-1.0]], h=[1.0, 0.0]))
    assert sol.status is LpStatus.INFEASIBLE


def test_unbounded():
    sol = solve_lp(LpProblem.build([-1.0], G=[[1.0]], h=[0.0]))
    assert sol.status is LpStatus.UNBOUNDED


def test_dual_example_against_vertex_enumeration():
    lp = LpProblem.build([-3, -3, 0, 0], H=[[0.5, 1, 1, 0], [1, 0.5, 0, 1]], k=[1, 1],
                         lower_bounds=[0, 0, 0, 0])
    best, argmins = brute_force_lp(lp)
    assert best == pytest.approx(-4.0)
    assert len(argmins) == 1
    np.testing.assert_allclose(argmins[0], [2 / 3, 2 / 3, 0, 0], atol=1e-12)

    sol = solve_lp(lp)
    np.testing.assert_allclose(sol.w, [2 / 3, 2 / 3, 0, 0], atol=1e-12)
    assert -sol.objective == pytest.approx(4.0, abs=1e-12)


def test_redundant_equality_rows():
    lp = LpProblem.build([1, 2], H=[[1, 1], [2, 2]], k=[1, 2], lower_bounds=[0, 0])
    sol = solve_lp(lp)
    np.testing.assert_allclose(sol.w, [1, 0], atol=1e-12)
    assert dual_objective(lp, sol) == pytest.approx(1.0)


def test_no_constraints():
    assert solve_lp(LpProblem.build([0.0, 1.0], lower_bounds=[0, 0])).objective == 0.0
    assert solve_lp(LpProblem.build([1.0])).status is LpStatus.UNBOUNDED


def test_degenerate_problem_terminates():
    # classic cycling example for the largest-coefficient rule
    c = [-0.75, 150, -0.02, 6]
    G = -np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
    h = -np.array([0, 0, 1])
    lp = LpProblem.build(c, G=G, h=h, lower_bounds=[0] * 4)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-0.05)


@pytest.mark.parametrize("seed", range(40))
def test_random_against_vertex_enumeration(seed):
    rng = np.random.default_rng(1000 + seed)
    lp = random_lp(rng, max_vars=3, max_rows=5)
    lp.lower_bounds[:] = 0.0  # keep the polyhedron pointed
    lp.cost = np.abs(lp.cost) + 0.1
    best, _ = brute_force_lp(lp)
    sol = solve_lp(lp)
    if best is None:
        assert sol.status is not LpStatus.OPTIMAL or lp.nvars == 0
    else:
        assert sol.objective == pytest.approx(best, abs=1e-8)


def test_duality_and_slackness_on_random_lps():
    rng = np.random.default_rng(7)
    for _ in range(50):
        lp = random_lp(rng)
        sol = solve_lp(lp)
        assert sol.status is LpStatus.OPTIMAL
        assert abs(sol.objective - dual_objective(lp, sol)) <= 1e-6
        yi = sol.ineq_duals(lp)
        assert np.all(yi >= -1e-8)
        assert np.all(np.abs(yi * (lp.G @ sol.w - lp.h)) <= 1e-6)
        assert np.all(lp.G @ sol.w >= lp.h - 1e-8)
        assert np.all(np.abs(lp.H @ sol.w - lp.k) <= 1e-8)


def test_determinism():
    rng = np.random.default_rng(3)
    lp = random_lp(rng)
    a, b = solve_lp(lp), solve_lp(lp)
    assert a.w.tobytes() == b.w.tobytes()
    assert a.duals.tobytes() == b.duals.tobytes()


FACE_LP = LpProblem.build([1, 1], G=[[1, 1]], h=[1], lower_bounds=[0, 0])


@pytest.mark.parametrize("prev", [[0.5, 0.5], [1.0, 0.0]])
def test_closest_returns_prev_when_optimal(prev):
    sol = solve_closest(FACE_LP, prev)
    np.testing.assert_allclose(sol.w, prev, atol=1e-7)


def test_closest_from_outside_face():
    prev = np.array([2.0, 2.0])
    sol = solve_closest(FACE_LP, prev)
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    assert np.all(sol.w >= -1e-9)
    # every point of the face is at distance 3
    _, face = brute_force_lp(FACE_LP)
    assert min(np.abs(v - prev).sum() for v in face) == pytest.approx(3.0)
    assert np.abs(sol.w - prev).sum() == pytest.approx(3.0, abs=1e-6)


def test_closest_partial_index():
    # the distance is measured on w0 only; w1 is unconstrained by it
    lp = LpProblem.build([0.0, 0.0], G=[[1, 1], [-1, -1]], h=[1, -1], lower_bounds=[0, 0])
    sol = solve_closest(lp, [0.25, 123.0], index=[0])
    assert sol.w[0] == pytest.approx(0.25, abs=1e-9)
    assert sol.w[1] == pytest.approx(0.75, abs=1e-9)


def test_closest_keeps_constraints_and_objective():
    rng = np.random.default_rng(11)
    for _ in range(25):
        lp = random_lp(rng, max_vars=5, max_rows=6)
        v_star = solve_lp(lp).objective
        prev = rng.normal(size=lp.nvars) * 3
        sol = solve_closest(lp, prev)
        assert lp.cost @ sol.w <= v_star + 1e-7 + 1e-12
        assert np.all(lp.G @ sol.w >= lp.h - 1e-8)
        assert np.all(np.abs(lp.H @ sol.w - lp.k) <= 1e-8)


def test_closest_passes_through_bad_status():
    assert solve_closest(LpProblem.build([-1.0], G=[[1.0]], h=[0.0]), [0.0]).status \
        is LpStatus.UNBOUNDED


def test_format_lp():
    text = format_lp(LpProblem.build([1, 0.1], G=[[1, 1]], h=[1], H=[[1, -1]], k=[0],
                                     lower_bounds=[0, -np.inf]))
    lines = text.splitlines()
    assert lines[0] == "min +1*w0 +0.10000000000000001*w1"
    assert lines[1] == "g0: +1*w0 +1*w1 >= 1"
    assert lines[2] == "e0: +1*w0 -1*w1 == 0"
    assert lines[3:] == ["w0 >= 0", "w1 free"]


def test_validate_lp():
    lp = LpProblem.build([1.0, 2.0], lower_bounds=[0.0, 1.0])
    assert lp.validate() == ["every lower bound must be 0 or -inf"]


def test_brute_force_helper_sanity():
    best, verts = brute_force_min([1, 1], [[1, 0], [0, 1]], [1, 2])
    assert best == pytest.approx(3.0)
    np.testing.assert_allclose(verts[0], [1, 2])
