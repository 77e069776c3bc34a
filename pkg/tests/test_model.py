import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from palm_bilevel.lp_core import LpProblem, solve_lp
from palm_bilevel.model import (
    BilevelInstance,
    InstanceError,
    example_instance,
    load_instance,
    mat,
    materialize_X,
    validate,
    vec,
)


def test_vec_is_column_major():
    np.testing.assert_array_equal(vec([[1, 2], [3, 4]]), [1, 3, 2, 4])


def test_vec_zero():
    assert not vec(np.zeros((3, 5))).any()


def test_vec_example_encoding():
    x = 0.1
    X = [[x, 0], [-x, 0], [0, 0], [0, 0]]
    np.testing.assert_array_equal(vec(X), [0.1, -0.1, 0, 0, 0, 0, 0, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.data())
def test_vec_roundtrip(m, n, data):
    X = data.draw(arrays(float, (m, n), elements=st.floats(-1e6, 1e6)))
    np.testing.assert_array_equal(mat(vec(X), m, n), X)


def test_materialize_example():
    inst = example_instance()
    for t in (0.0, 3.7, -2.0):
        X = materialize_X(inst, [0.1, t])
        np.testing.assert_array_equal(X, [[0.1, 0], [-0.1, 0], [0, 0], [0, 0]])
    assert not materialize_X(inst, [0, 0]).any()


def test_materialize_identity_and_constant():
    rng = np.random.default_rng(0)
    C0 = rng.normal(size=(3, 2))
    ident = BilevelInstance.from_matrix_form(
        C=np.zeros((3, 2)), b=np.zeros(3), e=np.zeros(2), c=np.zeros(6),
        d=np.zeros(2), A=np.zeros((0, 6)), B=np.zeros((0, 2)), a=np.zeros(0))
    X = rng.normal(size=(3, 2))
    np.testing.assert_array_equal(materialize_X(ident, vec(X)), X)

    const = BilevelInstance(m=3, n=2, p=0, r=4, C=np.zeros((3, 2)), b=np.zeros(3),
                            e=np.zeros(2), P=np.zeros((6, 4)), x0=vec(C0), cu=np.zeros(4),
                            d=np.zeros(2), Au=np.zeros((0, 4)), B=np.zeros((0, 2)), a=np.zeros(0))
    for _ in range(3):
        np.testing.assert_array_equal(materialize_X(const, rng.normal(size=4)), C0)


def test_materialize_dimension_mismatch():
    with pytest.raises(ValueError):
        materialize_X(example_instance(), [0.0, 0.0, 0.0])


def test_materialize_is_affine():
    rng = np.random.default_rng(1)
    P = rng.normal(size=(6, 3))
    inst = BilevelInstance(m=2, n=3, p=0, r=3, C=np.zeros((2, 3)), b=np.zeros(2),
                           e=np.zeros(3), P=P, x0=rng.normal(size=6), cu=np.zeros(3),
                           d=np.zeros(3), Au=np.zeros((0, 3)), B=np.zeros((0, 3)), a=np.zeros(0))
    u1, u2 = rng.normal(size=3), rng.normal(size=3)
    combo = (materialize_X(inst, u1 + u2) - materialize_X(inst, u1)
             - materialize_X(inst, u2) + materialize_X(inst, np.zeros(3)))
    np.testing.assert_allclose(combo, 0.0, atol=1e-12)


def test_example_validates_and_has_declared_dims():
    inst = example_instance()
    assert validate(inst) == []
    assert (inst.m, inst.n, inst.p, inst.r) == (4, 2, 3, 2)


def test_validate_reports_bad_B_rows():
    d = example_instance().to_dict()
    d["B"] = d["B"][:-1]
    problems = validate(BilevelInstance.from_dict(d))
    assert any(v.startswith("B row count") for v in problems)


def test_validate_reports_nan_and_collects_everything():
    d = example_instance().to_dict()
    d["C"][1][0] = float("nan")
    d["a"] = [0.0]
    problems = validate(BilevelInstance.from_dict(d))
    assert "non-finite entry C[1][0]" in problems
    assert any(v.startswith("a length") for v in problems)
    assert len(problems) == 2


def test_json_roundtrip(tmp_path):
    inst = example_instance()
    path = tmp_path / "ex.json"
    path.write_text(json.dumps(inst.to_dict()))
    back = load_instance(path)
    for key in ("C", "b", "e", "P", "x0", "cu", "d", "Au", "B", "a"):
        np.testing.assert_array_equal(getattr(back, key), getattr(inst, key))
    assert back.name == inst.name


def test_from_dict_missing_field():
    d = example_instance().to_dict()
    del d["cu"]
    with pytest.raises(InstanceError, match="cu"):
        BilevelInstance.from_dict(d)


def test_instance_arrays_are_read_only():
    inst = example_instance()
    with pytest.raises(ValueError):
        inst.C[0, 0] = 5.0


def _lower_level(inst, u):
    M = inst.C + materialize_X(inst, u)
    return LpProblem.build(inst.e, G=M, h=inst.b)


def test_example_lower_level_at_zero():
    sol = solve_lp(_lower_level(example_instance(), [0.0, 0.0]))
    np.testing.assert_allclose(sol.w, [2.0, 2.0], atol=1e-12)
    assert sol.objective == pytest.approx(4.0)


def test_example_lower_level_at_optimum():
    inst = example_instance()
    sol = solve_lp(_lower_level(inst, [0.1, 0.0]))
    np.testing.assert_allclose(sol.w, [2.5, 1.5], atol=1e-12)
    M = inst.C + materialize_X(inst, [0.1, 0.0])
    np.testing.assert_allclose((M @ sol.w)[:2], [3.0, 3.0], atol=1e-12)
