"""Symmetric eigenvalues, the Courant-Fischer min-max form, and alpha weights.

The cyclic Jacobi solver here is the in-house oracle used throughout the
tests; :func:`lambda_j_minmax` is the independent route through subspace
search that the operator discretizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .frames import FrameFamily

JACOBI_TOL = 1e-13


class SymMatrix:
    """Real symmetric matrix; entries are symmetrized on construction."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("matrix has non-finite entries")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self.entries = a

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"SymMatrix({self.entries.tolist()!r})"


def as_sym(m) -> SymMatrix:
    return m if isinstance(m, SymMatrix) else SymMatrix(m)


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if np.any(np.diff(self.values) < 0):
            raise InvalidInput("spectrum values must be ascending")


def jacobi_eigh(m, tol: float = JACOBI_TOL, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations for a symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||m||_F``.  Returns ascending eigenvalues and the matching
    eigenvectors as columns; equal eigenvalues keep their diagonal order.
    """
    a = np.array(as_sym(m).entries, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        # direct sum; ||a||^2 - ||diag a||^2 cancels below ~1e-8 relative
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff  # theta would overflow
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:  # pragma: no cover - quadratic convergence makes this unreachable in practice
        raise InvalidInput("Jacobi iteration did not converge")
    d = np.diag(a).copy()
    order = np.argsort(d, kind="stable")
    return d[order], v[:, order]


def eigenvalues_symmetric(m) -> Spectrum:
    values, vectors = jacobi_eigh(m)
    return Spectrum(values, vectors)


class AlphaWeights:
    """Coefficients alpha_1..alpha_n of the operator, with the extremal split.

    ``alpha = 2 min(alpha_1, alpha_n)`` is the weight carried by the
    half-sup/half-inf game, ``beta = 1 - alpha`` the weight of the remaining
    eigenvalue games, and ``betas`` their normalized coefficients.
    """

    def __init__(self, alphas):
        a = np.array(alphas, dtype=float).ravel()
        if a.size < 1:
            raise InvalidInput("alphas must be non-empty")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise InvalidInput("alphas must be finite and nonnegative")
        if abs(a.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"alphas must sum to 1, got {a.sum()!r}")
        if min(a[0], a[-1]) <= 0:
            raise InvalidInput("alphas require min(alpha_1, alpha_n) > 0")
        a.setflags(write=False)
        self.alphas = a
        # n == 1 has alpha_1 == alpha_n; cap so beta stays nonnegative
        self.alpha = min(2.0 * min(a[0], a[-1]), 1.0)
        self.beta = 1.0 - self.alpha
        betas = np.zeros_like(a)
        if self.beta > 0:
            betas[:] = a / self.beta
            betas[0] = (a[0] - self.alpha / 2) / self.beta
            betas[-1] = (a[-1] - self.alpha / 2) / self.beta
        betas.setflags(write=False)
        self.betas = betas

    @property
    def n(self) -> int:
        return self.alphas.size

    def active(self) -> list[int]:
        """1-based indices j with alpha_j > 0."""
        return [j + 1 for j in np.flatnonzero(self.alphas > 0)]

    @classmethod
    def extremal(cls, n: int) -> "AlphaWeights":
        a = np.zeros(n)
        a[0] += 0.5
        a[-1] += 0.5
        return cls(a)

    @classmethod
    def uniform(cls, n: int) -> "AlphaWeights":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def dominative(cls, n: int, p: float) -> "AlphaWeights":
        """Weights for lambda_1 + ... + lambda_{n-1} + (p-1) lambda_n."""
        a = np.full(n, 1.0 / (n + p - 2))
        a[-1] = (p - 1) / (n + p - 2)
        return cls(a)

    def __repr__(self):
        return f"AlphaWeights({self.alphas.tolist()!r})"


def weighted_eig_sum(m, w: AlphaWeights) -> float:
    """sum_i alpha_i lambda_i(m) with the Jacobi spectrum."""
    m = as_sym(m)
    if w.n != m.n:
        raise InvalidInput(f"weights have n={w.n}, matrix has n={m.n}")
    return float(np.dot(w.alphas, eigenvalues_symmetric(m).values))


def lambda_j_minmax(
    m,
    j: int,
    frames: FrameFamily,
    dirs_per_subspace: int | None = None,
    exhaustive: bool = True,
) -> float:
    """Courant-Fischer estimate of the j-th smallest eigenvalue.

    Minimizes, over spans of ``j``-subsets of every frame axis set, the
    maximum of ``<m v, v>`` over the subspace's direction sample.  With
    ``exhaustive=True`` the in-subspace supremum is made exact by also taking
    the largest Ritz value of the compressed ``j x j`` block (LAPACK), so the
    result never undercuts ``lambda_j``; with ``exhaustive=False`` only the
    sampled directions are used.
    """
    m = as_sym(m)
    if frames.n != m.n:
        raise InvalidInput(f"frames have n={frames.n}, matrix has n={m.n}")
    if not isinstance(j, (int, np.integer)) or not 1 <= j <= m.n:
        raise InvalidInput(f"j={j!r} outside 1..{m.n}")
    fam = frames
    if dirs_per_subspace is not None and dirs_per_subspace != frames.dirs_per_subspace:
        fam = FrameFamily(frames.frames, dirs_per_subspace)
    a = m.entries
    best = math.inf
    for basis, dirs in zip(fam.subspace_bases(j), fam.subspace_directions(j)):
        sup = float(np.max(np.einsum("ki,ij,kj->k", dirs, a, dirs)))
        if exhaustive:
            sup = max(sup, float(np.linalg.eigvalsh(basis.T @ a @ basis)[-1]))
        best = min(best, sup)
    return best
