"""Orthonormal frame families and the direction sets derived from them.

A :class:`FrameFamily` discretizes the two continuum searches in the
operator: the infimum over ``j``-dimensional subspaces becomes a minimum over
spans of ``j``-subsets of frame axes, and the supremum over unit vectors of a
subspace becomes a maximum over the subspace's axes plus a deterministic
low-discrepancy sample of its unit sphere.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import InvalidInput

ORTHONORMAL_TOL = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def sphere_sample(dim: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere of R^dim.

    Returns an array of shape ``(count, dim)``.  In two dimensions the points
    follow the golden-angle sequence on the half circle (antipodes are
    redundant for a symmetric second difference); in higher dimensions an
    unscrambled Halton sequence is pushed through the Gaussian quantile and
    normalized.  Axis directions are never produced, callers add them.
    """
    if count <= 0 or dim <= 1:
        return np.zeros((0, max(dim, 1)))
    if dim == 2:
        theta = np.pi * np.mod((np.arange(count) + 1) * _GOLDEN, 1.0)
        return np.column_stack([np.cos(theta), np.sin(theta)])
    pts = qmc.Halton(d=dim, scramble=False).random(count + 1)[1:]
    g = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def rotation_2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rational_rotation_2d(a: int, b: int) -> tuple[np.ndarray, int]:
    """Rotation with entries in (1/m)Z built from a Pythagorean triple.

    Returns ``(R, m)`` with ``m = a^2 + b^2``.  A lattice step ``eps`` that is
    a multiple of ``m*h`` maps every frame axis onto lattice nodes.
    """
    m = a * a + b * b
    if m == 0:
        raise InvalidInput("rational_rotation_2d needs (a, b) != (0, 0)")
    c, s = (a * a - b * b) / m, 2 * a * b / m
    return np.array([[c, -s], [s, c]]), m


def rational_rotation_3d(a: int, b: int, c: int, d: int) -> tuple[np.ndarray, int]:
    """Rotation from the integer quaternion (a, b, c, d); entries in (1/m)Z."""
    m = a * a + b * b + c * c + d * d
    if m == 0:
        raise InvalidInput("rational_rotation_3d needs a nonzero quaternion")
    r = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
        ],
        dtype=float,
    )
    return r / m, m


class FrameFamily:
    """A set of orthonormal frames; the canonical frame is always a member.

    Parameters
    ----------
    frames : sequence of (n, n) arrays
        Columns are the frame axes.
    dirs_per_subspace : int
        Size of the direction sample on each candidate subspace.  The ``j``
        axes spanning the subspace are always part of the sample, so values
        ``<= j`` mean "axes only".
    """

    def __init__(self, frames: Iterable[np.ndarray], dirs_per_subspace: int = 1):
        mats = [np.array(f, dtype=float) for f in frames]
        if not mats:
            raise InvalidInput("FrameFamily needs at least one frame")
        n = mats[0].shape[0]
        for f in mats:
            if f.shape != (n, n):
                raise InvalidInput(f"frame of shape {f.shape}, expected {(n, n)}")
            if not np.all(np.isfinite(f)):
                raise InvalidInput("frame has non-finite entries")
            if np.linalg.norm(f.T @ f - np.eye(n)) > ORTHONORMAL_TOL:
                raise InvalidInput("frame is not orthonormal to 1e-10")
        if not any(np.array_equal(f, np.eye(n)) for f in mats):
            mats.insert(0, np.eye(n))
        if int(dirs_per_subspace) < 1:
            raise InvalidInput("dirs_per_subspace must be >= 1")
        for f in mats:
            f.setflags(write=False)
        self.frames: tuple[np.ndarray, ...] = tuple(mats)
        self.dirs_per_subspace = int(dirs_per_subspace)
        self.n = n

    def __repr__(self):
        return f"FrameFamily(n={self.n}, frames={len(self.frames)}, dirs_per_subspace={self.dirs_per_subspace})"

    def __len__(self):
        return len(self.frames)

    @classmethod
    def canonical(cls, n: int, dirs_per_subspace: int = 1) -> "FrameFamily":
        return cls([np.eye(n)], dirs_per_subspace)

    @classmethod
    def rotations_2d(cls, angles: Sequence[float], dirs_per_subspace: int = 1) -> "FrameFamily":
        """Canonical frame plus planar rotations by ``angles`` (radians)."""
        return cls([np.eye(2)] + [rotation_2d(a) for a in angles], dirs_per_subspace)

    @classmethod
    def random(cls, n: int, count: int, seed: int = 0, dirs_per_subspace: int = 1) -> "FrameFamily":
        """Canonical frame plus ``count - 1`` Haar-random frames."""
        rng = np.random.default_rng(seed)
        return cls([np.eye(n)] + [random_orthogonal(n, rng) for _ in range(count - 1)], dirs_per_subspace)

    def with_frames(self, extra: Iterable[np.ndarray]) -> "FrameFamily":
        return FrameFamily(list(self.frames) + [np.asarray(f, float) for f in extra], self.dirs_per_subspace)

    def subspace_bases(self, j: int) -> list[np.ndarray]:
        """Bases ``(n, j)`` of the candidate subspaces of dimension ``j``.

        For ``j == n`` every frame spans the same space, so a single basis
        (the identity) is returned; :meth:`subspace_directions` then pools the
        samples of all frames for it.
        """
        self._check_j(j)
        if j == self.n:
            return [np.eye(self.n)]
        return [f[:, list(idx)] for f in self.frames for idx in itertools.combinations(range(self.n), j)]

    def subspace_directions(self, j: int) -> list[np.ndarray]:
        """Direction samples ``(k, n)`` for each candidate subspace of dim ``j``."""
        self._check_j(j)
        coeffs = sphere_sample(j, max(self.dirs_per_subspace - j, 0))
        if j == self.n:
            blocks = [np.vstack([f.T, coeffs @ f.T]) for f in self.frames]
            return [np.vstack(blocks)]
        out = []
        for f in self.frames:
            for idx in itertools.combinations(range(self.n), j):
                basis = f[:, list(idx)]
                out.append(np.vstack([basis.T, coeffs @ basis.T]))
        return out

    def _check_j(self, j):
        if not 1 <= j <= self.n:
            raise InvalidInput(f"subspace dimension j={j} outside 1..{self.n}")


class DirectionPool:
    """Unique directions (up to sign) with index lists per candidate subspace.

    The second difference is even in ``v``, so ``v`` and ``-v`` share an
    entry.  ``subspaces[j]`` is a list of index arrays into ``directions``.
    """

    def __init__(self, family: FrameFamily, dims: Iterable[int]):
        self.family = family
        self._index: dict[tuple, int] = {}
        self._dirs: list[np.ndarray] = []
        self.subspaces: dict[int, list[np.ndarray]] = {}
        for j in sorted(set(dims)):
            self.subspaces[j] = [
                np.array(sorted({self._add(v) for v in block}), dtype=np.intp)
                for block in family.subspace_directions(j)
            ]
        self.directions = np.array(self._dirs, dtype=float).reshape(-1, family.n)
        self.directions.setflags(write=False)

    def _add(self, v: np.ndarray) -> int:
        v = np.asarray(v, float)
        v = v / np.linalg.norm(v)
        k = np.flatnonzero(np.abs(v) > 1e-12)[0]
        if v[k] < 0:
            v = -v
        key = tuple(np.round(v, 12) + 0.0)
        idx = self._index.get(key)
        if idx is None:
            idx = self._index[key] = len(self._dirs)
            self._dirs.append(v)
        return idx

    def all_indices(self) -> np.ndarray:
        return np.arange(len(self.directions), dtype=np.intp)
