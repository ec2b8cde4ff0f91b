"""One-step DPP operators on grid functions.

Every variant is compiled to the same :class:`Program`: an optional linear
ball-average term with weight ``q`` plus a list of ``(weight, subspaces)``
terms, each contributing ``weight * min_S max_{v in S} D(v)`` where
``D(v) = (u(x + eps v) + u(x - eps v)) / 2``.  Subspaces are index arrays into
a shared direction table, so the compiled kernels only see integers and
stencils.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .eig_core import AlphaWeights
from .errors import InvalidInput, OutOfDomain
from .frames import DirectionPool, FrameFamily
from .grid import GridFunction, Lattice

VARIANTS = ("general", "extremal", "split", "dominative")


@dataclass(frozen=True)
class DppConfig:
    eps: float
    weights: AlphaWeights
    frames: FrameFamily
    interpolation: str = "multilinear"

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise InvalidInput(f"eps must be > 0, got {self.eps!r}")
        if self.interpolation != "multilinear":
            raise InvalidInput(f"unsupported interpolation {self.interpolation!r}")
        if self.weights.n != self.frames.n:
            raise InvalidInput(f"weights have n={self.weights.n}, frames have n={self.frames.n}")

    @property
    def n(self) -> int:
        return self.frames.n


@dataclass(frozen=True)
class DominativeConfig:
    """Ball-average mixture for the dominative p-Laplacian.

    ``ball_quadrature_points`` is the number of midpoint nodes per axis of the
    bounding cube of the ball.
    """

    p: float
    n: int
    ball_quadrature_points: int = 8

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 2):
            raise InvalidInput(f"p must be >= 2, got {self.p!r}")
        if self.n < 1:
            raise InvalidInput("n must be >= 1")
        if self.ball_quadrature_points < 1:
            raise InvalidInput("ball_quadrature_points must be >= 1")

    @property
    def q(self) -> float:
        return (self.n + 2) / (self.n + self.p)


def ball_quadrature(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes of a ``k^n`` grid on ``[-1, 1]^n`` kept inside the unit ball.

    Returns ``(points, weights)`` with equal weights summing to 1.  The node
    set is symmetric under sign flips and coordinate permutations, so odd
    moments vanish and the second moments are isotropic.
    """
    c = -1.0 + (2.0 * np.arange(k) + 1.0) / k
    mesh = np.stack([g.ravel() for g in np.meshgrid(*([c] * n), indexing="ij")], axis=1)
    pts = mesh[np.sum(mesh * mesh, axis=1) <= 1.0]
    if pts.shape[0] == 0:  # k == 1 keeps only the center
        pts = np.zeros((1, n))
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


@dataclass
class Program:
    directions: np.ndarray
    terms: list[tuple[float, list[np.ndarray]]]
    ball_weight: float = 0.0
    ball_points: np.ndarray | None = None
    ball_weights: np.ndarray | None = None
    name: str = "general"

    @property
    def n(self) -> int:
        return self.directions.shape[1]


def general_program(weights: AlphaWeights, frames: FrameFamily) -> Program:
    active = weights.active()
    pool = DirectionPool(frames, active)
    terms = [(float(weights.alphas[j - 1]), pool.subspaces[j]) for j in active]
    return Program(pool.directions, terms, name="general")


def extremal_program(frames: FrameFamily) -> Program:
    n = frames.n
    pool = DirectionPool(frames, {1, n})
    return Program(pool.directions, [(0.5, pool.subspaces[1]), (0.5, pool.subspaces[n])], name="extremal")


def split_program(weights: AlphaWeights, frames: FrameFamily) -> Program:
    n = weights.n
    dims = {1, n} | {j + 1 for j in np.flatnonzero(weights.betas > 0)}
    pool = DirectionPool(frames, dims)
    a = weights.alpha
    terms = [(a / 2, pool.subspaces[n]), (a / 2, pool.subspaces[1])]
    if weights.beta > 0:
        for i in range(n):
            if weights.betas[i] > 0:
                terms.append((weights.beta * float(weights.betas[i]), pool.subspaces[i + 1]))
    return Program(pool.directions, terms, name="split")


def dominative_program(dcfg: DominativeConfig, frames: FrameFamily) -> Program:
    if dcfg.n != frames.n:
        raise InvalidInput(f"dominative config has n={dcfg.n}, frames have n={frames.n}")
    n = frames.n
    pool = DirectionPool(frames, {n})
    pts, wts = ball_quadrature(n, dcfg.ball_quadrature_points)
    q = dcfg.q
    terms = [(1.0 - q, pool.subspaces[n])] if q < 1.0 else []
    return Program(pool.directions, terms, ball_weight=q, ball_points=pts, ball_weights=wts, name="dominative")


def build_program(variant: str, cfg: DppConfig, dominative: DominativeConfig | None = None) -> Program:
    if variant == "general":
        return general_program(cfg.weights, cfg.frames)
    if variant == "extremal":
        return extremal_program(cfg.frames)
    if variant == "split":
        return split_program(cfg.weights, cfg.frames)
    if variant == "dominative":
        if dominative is None:
            raise InvalidInput("dominative variant needs a DominativeConfig")
        return dominative_program(dominative, cfg.frames)
    raise InvalidInput(f"unknown operator variant {variant!r}; expected one of {VARIANTS}")


def _combine(D: np.ndarray, program: Program, ball: np.ndarray | None) -> np.ndarray:
    """Reduce per-direction second differences ``D`` (K, P) to operator values."""
    out = np.zeros(D.shape[1])
    if program.ball_weight > 0:
        out += program.ball_weight * ball
    for w, subs in program.terms:
        vals = np.stack([D[idx].max(axis=0) for idx in subs]).min(axis=0)
        out += w * vals
    return out


def _check_unit(v):
    v = np.asarray(v, float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise InvalidInput("direction must be a unit vector")
    return v


def second_difference(u: GridFunction, x, v, eps: float) -> float:
    """``(u(x + eps v) + u(x - eps v)) / 2`` with multilinear interpolation."""
    v = _check_unit(v)
    x = np.asarray(x, float)
    vals = u.interpolate(np.stack([x + eps * v, x - eps * v]))
    return float(0.5 * (vals[0] + vals[1]))


def evaluate_program(u: GridFunction, X, program: Program, eps: float) -> np.ndarray:
    """Operator values at arbitrary points ``X`` (P, n) by interpolation."""
    X = np.atleast_2d(np.asarray(X, float))
    K = program.directions.shape[0]
    P = X.shape[0]
    D = np.empty((K, P))
    for k, v in enumerate(program.directions):
        D[k] = 0.5 * (u.interpolate(X + eps * v) + u.interpolate(X - eps * v))
    ball = None
    if program.ball_weight > 0:
        ball = np.zeros(P)
        for c, w in zip(program.ball_points, program.ball_weights):
            ball += w * u.interpolate(X + eps * c)
    return _combine(D, program, ball)


def _point(u: GridFunction, x) -> np.ndarray:
    x = np.asarray(x, float)
    if x.shape != (u.lattice.n,):
        raise InvalidInput(f"point has shape {x.shape}, expected ({u.lattice.n},)")
    if not u.lattice.in_open_box(x)[0]:
        raise OutOfDomain(f"x={x.tolist()} is not in the open box")
    return x


def apply_dpp(u: GridFunction, x, cfg: DppConfig) -> float:
    return float(evaluate_program(u, _point(u, x), general_program(cfg.weights, cfg.frames), cfg.eps)[0])


def apply_dpp_extremal(u: GridFunction, x, eps: float, frames: FrameFamily) -> float:
    return float(evaluate_program(u, _point(u, x), extremal_program(frames), eps)[0])


def apply_dpp_split(u: GridFunction, x, cfg: DppConfig) -> float:
    return float(evaluate_program(u, _point(u, x), split_program(cfg.weights, cfg.frames), cfg.eps)[0])


def apply_dpp_dominative(u: GridFunction, x, eps: float, dcfg: DominativeConfig, frames: FrameFamily) -> float:
    return float(evaluate_program(u, _point(u, x), dominative_program(dcfg, frames), eps)[0])


@dataclass
class CompiledProgram:
    """Flat integer/float arrays consumed by the node kernels."""

    dir_ptr: np.ndarray
    dir_off: np.ndarray
    dir_w: np.ndarray
    sub_ptr: np.ndarray
    sub_idx: np.ndarray
    term_ptr: np.ndarray
    term_w: np.ndarray
    ball_off: np.ndarray
    ball_w: np.ndarray
    ball_weight: float
    n_dirs: int = field(init=False)

    def __post_init__(self):
        self.n_dirs = len(self.dir_ptr) - 1


def _merge(offs: np.ndarray, wts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(offs, return_inverse=True)
    acc = np.zeros(uniq.size)
    np.add.at(acc, inv, wts)
    return uniq.astype(np.intp), acc


class GridOperator:
    """A :class:`Program` bound to a lattice and a step ``eps``.

    Every direction becomes a fixed stencil of flat index offsets and weights
    (the ``1/2`` of the second difference included), valid at every interior
    node because the lattice is uniform.
    """

    def __init__(self, lattice: Lattice, program: Program, eps: float, backend: str | None = None):
        if program.n != lattice.n:
            raise InvalidInput(f"program has n={program.n}, lattice has n={lattice.n}")
        if eps < lattice.h * (1 - 1e-12):
            raise InvalidInput(f"eps={eps} is smaller than the lattice spacing h={lattice.h}")
        if eps < 2 * lattice.h * (1 - 1e-12):
            warnings.warn(f"eps={eps} < 2h={2 * lattice.h}; interpolation error dominates", RuntimeWarning, stacklevel=2)
        if lattice.collar_width < eps * (1 - 1e-12):
            raise InvalidInput(f"collar width {lattice.collar_width} is smaller than eps={eps}")
        self.lattice = lattice
        self.program = program
        self.eps = float(eps)
        self.kernels = _backend.get_kernels(backend)
        self.interior = lattice.interior_nodes()
        self.compiled = self._compile()

    def _compile(self) -> CompiledProgram:
        lat, eps = self.lattice, self.eps
        ptr, offs, wts = [0], [], []
        for v in self.program.directions:
            op, wp = lat.corner_stencil(eps * v)
            om, wm = lat.corner_stencil(-eps * v)
            o, w = _merge(np.concatenate([op, om]), 0.5 * np.concatenate([wp, wm]))
            offs.append(o)
            wts.append(w)
            ptr.append(ptr[-1] + o.size)
        sub_ptr, sub_idx, term_ptr, term_w = [0], [], [0], []
        for w, subs in self.program.terms:
            for idx in subs:
                sub_idx.append(np.asarray(idx, np.intp))
                sub_ptr.append(sub_ptr[-1] + len(idx))
            term_ptr.append(term_ptr[-1] + len(subs))
            term_w.append(w)
        if self.program.ball_weight > 0:
            bo, bw = [], []
            for c, w in zip(self.program.ball_points, self.program.ball_weights):
                o, cw = lat.corner_stencil(eps * c)
                bo.append(o)
                bw.append(w * cw)
            ball_off, ball_w = _merge(np.concatenate(bo), np.concatenate(bw))
        else:
            ball_off, ball_w = np.zeros(0, np.intp), np.zeros(0)
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)  # noqa: E731
        return CompiledProgram(
            dir_ptr=np.array(ptr, np.intp),
            dir_off=cat(offs, np.intp),
            dir_w=cat(wts, float),
            sub_ptr=np.array(sub_ptr, np.intp),
            sub_idx=cat(sub_idx, np.intp),
            term_ptr=np.array(term_ptr, np.intp),
            term_w=np.array(term_w, float),
            ball_off=np.ascontiguousarray(ball_off, np.intp),
            ball_w=np.ascontiguousarray(ball_w, float),
            ball_weight=float(self.program.ball_weight),
        )

    def apply(self, values: np.ndarray, nodes: np.ndarray | None = None) -> np.ndarray:
        """Operator values at ``nodes`` (default: all interior nodes)."""
        nodes = self.interior if nodes is None else np.ascontiguousarray(nodes, np.intp)
        out = np.empty(nodes.size)
        self.kernels.apply_at_nodes(np.ascontiguousarray(values, float), nodes, self.compiled, out)
        return out

    def gauss_seidel_sweep(self, values: np.ndarray) -> float:
        """In-place sweep over interior nodes in index order; returns max |change|."""
        return self.kernels.gauss_seidel_sweep(values, self.interior, self.compiled)

    def residual(self, values: np.ndarray) -> float:
        if self.interior.size == 0:
            return 0.0
        return float(np.max(np.abs(self.apply(values) - values[self.interior])))
