"""Uniform lattices over boxes, grid functions and boundary payoffs."""
from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np

from .errors import InvalidInput, OutOfDomain

SNAP_TOL = 1e-9


class Lattice:
    """Uniform lattice over ``[lo, hi]^n`` plus a collar of nodes on each side.

    The collar holds the payoff.  Its width is rounded up to a whole number of
    cells, so ``collar_width`` may exceed the requested value by less than
    ``h``.
    """

    def __init__(self, n: int, lo: float, hi: float, h: float, collar: float):
        if n < 1:
            raise InvalidInput("n must be >= 1")
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise InvalidInput("box needs finite lo < hi")
        if not h > 0:
            raise InvalidInput("h must be > 0")
        if collar < 0:
            raise InvalidInput("collar must be >= 0")
        span = (hi - lo) / h
        if abs(span - round(span)) > 1e-6:
            raise InvalidInput(f"(hi - lo)/h = {span} is not an integer")
        self.n = int(n)
        self.lo, self.hi, self.h = float(lo), float(hi), float(h)
        self.span_cells = int(round(span))
        self.collar_cells = int(math.ceil(collar / h - SNAP_TOL))
        self.collar_width = self.collar_cells * self.h
        self.m = self.span_cells + 2 * self.collar_cells + 1
        self.origin = self.lo - self.collar_width
        self.shape = (self.m,) * self.n
        self.strides = np.array([self.m ** (self.n - 1 - k) for k in range(self.n)], dtype=np.intp)

    def __repr__(self):
        return (
            f"Lattice(n={self.n}, lo={self.lo}, hi={self.hi}, h={self.h}, "
            f"collar={self.collar_width}, m={self.m})"
        )

    @property
    def size(self) -> int:
        return self.m ** self.n

    def axis(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.m)

    def coords(self) -> np.ndarray:
        """All node coordinates, shape ``(size, n)``, in C order."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def index_coords(self) -> np.ndarray:
        idx = np.indices(self.shape).reshape(self.n, -1).T
        return idx

    def interior_mask(self) -> np.ndarray:
        """Nodes strictly inside the open box."""
        k = self.index_coords()
        c = self.collar_cells
        inside = (k > c) & (k < c + self.span_cells)
        return np.all(inside, axis=1)

    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask()).astype(np.intp)

    def collar_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.interior_mask()).astype(np.intp)

    def in_open_box(self, pts) -> np.ndarray:
        p = np.atleast_2d(pts)
        return np.all((p > self.lo) & (p < self.hi), axis=1)

    def nearest_node(self, x) -> int:
        t = np.rint((np.asarray(x, float) - self.origin) / self.h).astype(np.intp)
        if np.any(t < 0) or np.any(t >= self.m):
            raise OutOfDomain(f"point {x} outside lattice")
        return int(t @ self.strides)

    def corner_stencil(self, offset) -> tuple[np.ndarray, np.ndarray]:
        """Multilinear corners for a fixed displacement ``offset`` (world units).

        Returns flat index offsets and weights; zero-weight corners are dropped.
        """
        t = np.asarray(offset, float) / self.h
        base, frac = _split(t)
        offs, wts = [], []
        for corner in range(1 << self.n):
            bits = np.array([(corner >> k) & 1 for k in range(self.n)])
            w = float(np.prod(np.where(bits == 1, frac, 1.0 - frac)))
            if w == 0.0:
                continue
            offs.append(int((base + bits) @ self.strides))
            wts.append(w)
        return np.array(offs, dtype=np.intp), np.array(wts)


def _split(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Integer base and fractional part, snapping near-integers."""
    r = np.rint(t)
    t = np.where(np.abs(t - r) <= SNAP_TOL, r, t)
    base = np.floor(t)
    return base.astype(np.intp), t - base


class GridFunction:
    """Scalar values on every node of a :class:`Lattice`."""

    def __init__(self, lattice: Lattice, values=None):
        self.lattice = lattice
        if values is None:
            values = np.zeros(lattice.size)
        v = np.array(values, dtype=float).reshape(-1)
        if v.size != lattice.size:
            raise InvalidInput(f"expected {lattice.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("grid values must be finite")
        self.values = v

    def copy(self) -> "GridFunction":
        return GridFunction(self.lattice, self.values.copy())

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.lattice.shape)

    def __call__(self, pts) -> np.ndarray | float:
        return self.interpolate(pts)

    def interpolate(self, pts):
        """Multilinear interpolation; raises OutOfDomain outside the lattice."""
        lat = self.lattice
        p = np.asarray(pts, float)
        scalar = p.ndim == 1
        p = np.atleast_2d(p)
        if p.shape[1] != lat.n:
            raise InvalidInput(f"points have dimension {p.shape[1]}, lattice has {lat.n}")
        t = (p - lat.origin) / lat.h
        r = np.rint(t)
        t = np.where(np.abs(t - r) <= SNAP_TOL, r, t)
        if np.any(t < 0) or np.any(t > lat.m - 1):
            raise OutOfDomain("probe outside lattice")
        # the last node line uses the cell below it
        base = np.clip(np.floor(t), 0, max(lat.m - 2, 0)).astype(np.intp)
        frac = t - base
        out = np.zeros(p.shape[0])
        for corner in range(1 << lat.n):
            bits = np.array([(corner >> k) & 1 for k in range(lat.n)])
            w = np.prod(np.where(bits == 1, frac, 1.0 - frac), axis=1)
            idx = (base + bits) @ lat.strides
            nz = w != 0.0
            out[nz] += w[nz] * self.values[idx[nz]]
        return float(out[0]) if scalar else out


_ALLOWED_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "arctan2": np.arctan2,
    "minimum": np.minimum, "maximum": np.maximum, "clip": np.clip, "where": np.where, "sign": np.sign,
}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
    ast.Mod, ast.Gt, ast.GtE, ast.Lt, ast.LtE, ast.Eq, ast.NotEq, ast.IfExp, ast.BoolOp,
    ast.And, ast.Or,
)


class BoundaryPayoff:
    """Payoff G, either a vectorized callable or a table of node values.

    ``fn`` maps an ``(k, n)`` array of points to ``k`` values.  Use
    :meth:`from_expression` for the string form accepted by the CLI, with
    variables ``x1 .. xn`` and ``r`` (Euclidean norm).
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray] | None = None, table: np.ndarray | None = None, name: str = "G"):
        if (fn is None) == (table is None):
            raise InvalidInput("BoundaryPayoff needs exactly one of fn or table")
        self.fn = fn
        self.table = None if table is None else np.asarray(table, float).reshape(-1)
        self.name = name

    def __repr__(self):
        return f"BoundaryPayoff({self.name!r})"

    def __call__(self, pts) -> np.ndarray:
        if self.fn is None:
            raise InvalidInput("tabulated payoff has no pointwise form")
        p = np.atleast_2d(np.asarray(pts, float))
        vals = np.asarray(self.fn(p), float)
        return np.broadcast_to(vals, (p.shape[0],)).copy()

    def on_lattice(self, lattice: Lattice) -> np.ndarray:
        if self.table is not None:
            if self.table.size != lattice.size:
                raise InvalidInput(f"payoff table has {self.table.size} values, lattice has {lattice.size}")
            vals = self.table.copy()
        else:
            vals = self(lattice.coords())
        collar = lattice.collar_nodes()
        if not np.all(np.isfinite(vals[collar])):
            raise InvalidInput("payoff G is not finite on the collar")
        return vals

    @classmethod
    def constant(cls, c: float) -> "BoundaryPayoff":
        return cls(lambda p: np.full(p.shape[0], float(c)), name=f"{c!r}")

    @classmethod
    def from_expression(cls, expr: str, n: int) -> "BoundaryPayoff":
        tree = ast.parse(expr, mode="eval")
        names = {f"x{k + 1}" for k in range(n)} | {"r", "pi"}
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise InvalidInput(f"payoff expression uses unsupported syntax {type(node).__name__}")
            if isinstance(node, ast.Name) and node.id not in names and node.id not in _ALLOWED_FUNCS:
                raise InvalidInput(f"payoff expression uses unknown name {node.id!r}")
            if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS):
                raise InvalidInput("payoff expression calls an unsupported function")
        code = compile(tree, "<payoff>", "eval")

        def fn(p):
            env = dict(_ALLOWED_FUNCS)
            env.update({f"x{k + 1}": p[:, k] for k in range(n)})
            env["r"] = np.linalg.norm(p, axis=1)
            env["pi"] = math.pi
            # non-finite results are reported by on_lattice, not as warnings
            with np.errstate(all="ignore"):
                return eval(code, {"__builtins__": {}}, env)  # noqa: S307 - AST whitelisted above

        return cls(fn, name=expr)
