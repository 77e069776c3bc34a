"""Bilevel problem data.

The upper level chooses a decision vector ``u`` that enters the lower level
through an affine map ``vec(X) = P @ u + x0``::

    min_{u, y}  cu @ u + d @ y
    s.t.        Au @ u + B @ y >= a
                y solves  min_y e @ y  s.t.  (C + X) @ y >= b

With ``P = I`` and ``x0 = 0`` the matrix ``X`` itself is the upper-level
variable. ``vec`` stacks columns (column-major).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MATRICES = ("C", "P", "Au", "B")
_VECTORS = ("b", "e", "x0", "cu", "d", "a")


def vec(X):
    """Stack the columns of ``X`` into one vector."""
    return np.asarray(X, dtype=float).reshape(-1, order="F")


def mat(v, m, n):
    """Inverse of :func:`vec` for an ``m`` by ``n`` matrix."""
    return np.asarray(v, dtype=float).reshape((m, n), order="F")


@dataclass(frozen=True, eq=False)
class BilevelInstance:
    m: int
    n: int
    p: int
    r: int
    C: np.ndarray
    b: np.ndarray
    e: np.ndarray
    P: np.ndarray
    x0: np.ndarray
    cu: np.ndarray
    d: np.ndarray
    Au: np.ndarray
    B: np.ndarray
    a: np.ndarray
    name: str = "instance"

    def __post_init__(self):
        for key in (*_MATRICES, *_VECTORS):
            arr = np.array(getattr(self, key), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @classmethod
    def from_matrix_form(cls, C, b, e, c, d, A, B, a, name="instance"):
        """Build an instance whose upper-level variable is the matrix X itself."""
        C = np.asarray(C, dtype=float)
        m, n = C.shape
        B = np.asarray(B, dtype=float).reshape(-1, n)
        return cls(m=m, n=n, p=B.shape[0], r=m * n, C=C, b=b, e=e,
                   P=np.eye(m * n), x0=np.zeros(m * n), cu=c, d=d,
                   Au=np.asarray(A, dtype=float).reshape(B.shape[0], m * n),
                   B=B, a=a, name=name)

    def to_dict(self):
        out = {"m": self.m, "n": self.n, "p": self.p, "r": self.r}
        for key in ("C", "b", "e", "P", "x0", "cu", "d", "Au", "B", "a"):
            out[key] = getattr(self, key).tolist()
        out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data):
        """Parse the JSON instance schema.

        Raises
        ------
        InstanceError
            On missing fields or arrays that cannot be read as numbers.
            Dimension problems are left to :func:`validate`.
        """
        missing = [k for k in ("m", "n", "p", "r", *_MATRICES, *_VECTORS) if k not in data]
        if missing:
            raise InstanceError([f"missing field '{k}'" for k in missing])
        problems = []
        kwargs = {}
        for k in ("m", "n", "p", "r"):
            v = data[k]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                problems.append(f"field '{k}' must be a non-negative integer")
            kwargs[k] = v
        for k in (*_MATRICES, *_VECTORS):
            try:
                kwargs[k] = np.asarray(data[k], dtype=float)
            except (TypeError, ValueError):
                problems.append(f"field '{k}' is not a rectangular numeric array")
        if problems:
            raise InstanceError(problems)
        m, n, p, r = (kwargs[k] for k in ("m", "n", "p", "r"))
        # empty JSON arrays carry no shape; take it from the declared dimensions
        for k, shape in (("C", (m, n)), ("P", (m * n, r)), ("Au", (p, r)), ("B", (p, n))):
            if kwargs[k].size == 0 and shape[0] * shape[1] == 0:
                kwargs[k] = kwargs[k].reshape(shape)
        return cls(name=str(data.get("name", "instance")), **kwargs)

    def materialize_X(self, u):
        return materialize_X(self, u)


class InstanceError(ValueError):
    """Raised when an instance cannot be parsed or fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def materialize_X(inst, u):
    """Return the m-by-n matrix ``mat(P @ u + x0)``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != inst.r:
        raise ValueError(f"u has length {u.shape[0]}, expected r = {inst.r}")
    return mat(inst.P @ u + inst.x0, inst.m, inst.n)


def step_matrix(inst, du):
    """The matrix perturbation ``mat(P @ du)`` caused by a step in u."""
    du = np.asarray(du, dtype=float).reshape(-1)
    return mat(inst.P @ du, inst.m, inst.n)


def validate(inst):
    """Check dimensions and finiteness; return every violation found.

    An empty list means the instance is usable.
    """
    out = []
    for k in ("m", "n", "p", "r"):
        v = getattr(inst, k)
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
            out.append(f"{k} must be a non-negative integer")
    if out:
        return out
    m, n, p, r = inst.m, inst.n, inst.p, inst.r
    dims = {"m": m, "n": n, "p": p, "r": r, "m*n": m * n}
    layout = {
        "C": ("m", "n"), "P": ("m*n", "r"), "Au": ("p", "r"), "B": ("p", "n"),
        "b": ("m",), "e": ("n",), "x0": ("m*n",), "cu": ("r",), "d": ("n",), "a": ("p",),
    }
    for key, names in layout.items():
        shape = tuple(dims[k] for k in names)
        arr = getattr(inst, key)
        if arr.ndim != len(shape):
            out.append(f"{key} must be {len(shape)}-dimensional, got shape {arr.shape}")
            continue
        if len(shape) == 2:
            if arr.shape[0] != shape[0]:
                out.append(f"{key} row count {arr.shape[0]} != {names[0]} ({shape[0]})")
            if arr.shape[1] != shape[1]:
                out.append(f"{key} column count {arr.shape[1]} != {names[1]} ({shape[1]})")
        elif arr.shape[0] != shape[0]:
            out.append(f"{key} length {arr.shape[0]} != {names[0]} ({shape[0]})")
        bad = np.argwhere(~np.isfinite(arr))
        for idx in bad:
            pos = "][".join(str(i) for i in idx)
            out.append(f"non-finite entry {key}[{pos}]")
    return out


def example_instance():
    """The two-variable example with upper variable x and |x| as objective.

    ``u = (x, t)`` where ``t`` bounds ``|x|``. Rows 3 and 4 of the lower
    level encode ``y >= 0``.
    """
    P = np.zeros((8, 2))
    # vec index of X[i][j] is i + j*m
    P[0, 0] = 1.0
    P[1, 0] = -1.0
    return BilevelInstance(
        m=4, n=2, p=3, r=2,
        C=np.array([[0.5, 1.0], [1.0, 0.5], [1.0, 0.0], [0.0, 1.0]]),
        b=np.array([3.0, 3.0, 0.0, 0.0]),
        e=np.array([1.0, 1.0]),
        P=P,
        x0=np.zeros(8),
        cu=np.array([0.0, 1.0]),
        d=np.array([0.0, 0.0]),
        Au=np.array([[0.0, 0.0], [-1.0, 1.0], [1.0, 1.0]]),
        B=np.array([[0.0, -1.0], [0.0, 0.0], [0.0, 0.0]]),
        a=np.array([-1.5, 0.0, 0.0]),
        name="minimal-example",
    )


def load_instance(path):
    """Read an instance from a JSON file.

    Raises ``json.JSONDecodeError`` on malformed JSON and
    :class:`InstanceError` when the content does not form a valid instance.
    """
    text = Path(path).read_text()
    data = json.loads(text)
    if not isinstance(data, dict):
        raise InstanceError(["top-level JSON value must be an object"])
    inst = BilevelInstance.from_dict(data)
    problems = validate(inst)
    if problems:
        raise InstanceError(problems)
    return inst


def dumps_instance(inst, indent=2):
    return json.dumps(inst.to_dict(), indent=indent)
