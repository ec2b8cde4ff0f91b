"""Empirical Hölder ratios and moduli of continuity of grid functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .errors import DegenerateInput, InvalidInput, OutOfDomain
from .grid import GridFunction

BLOCK = 1024
SAMPLED_PAIRS_PER_BIN = 20000
DEFAULT_BINS = 24


@dataclass
class HolderReport:
    delta: float
    r: float
    eps: float
    ratio_sup: float
    argmax_x: np.ndarray | None
    argmax_z: np.ndarray | None
    sup_norm: float
    nodes: int
    pairs: int
    exhaustive: bool
    bins: list = field(default_factory=list)  # (bin_lo, bin_hi, max_diff, pair_count)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "r": self.r,
            "eps": self.eps,
            "ratio_sup": self.ratio_sup,
            "argmax_x": None if self.argmax_x is None else self.argmax_x.tolist(),
            "argmax_z": None if self.argmax_z is None else self.argmax_z.tolist(),
            "sup_norm": self.sup_norm,
            "nodes": self.nodes,
            "pairs": self.pairs,
            "exhaustive": self.exhaustive,
        }


def _ball_nodes(u: GridFunction, center, radius: float) -> np.ndarray:
    lat = u.lattice
    c = np.asarray(center, float)
    if c.shape != (lat.n,):
        raise InvalidInput(f"center has shape {c.shape}, expected ({lat.n},)")
    lo, hi = lat.origin, lat.origin + (lat.m - 1) * lat.h
    if np.any(c - radius < lo - 1e-12) or np.any(c + radius > hi + 1e-12):
        raise OutOfDomain(f"ball of radius {radius} around {c.tolist()} leaves the lattice")
    coords = lat.coords()
    return np.flatnonzero(np.linalg.norm(coords - c, axis=1) <= radius * (1 + 1e-12))


def _edges(bins, rmax: float, h: float) -> np.ndarray:
    if np.ndim(bins) == 0:
        k = int(bins)
        if k < 1:
            raise InvalidInput("bins must be >= 1")
        return np.geomspace(0.5 * h, rmax * (1 + 1e-12), k + 1)
    e = np.asarray(bins, float)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
        raise InvalidInput("bin edges must be increasing")
    return e


class _PairScan:
    """Visits node pairs, exhaustively or by a stratified subsample."""

    def __init__(self, X: np.ndarray, vals: np.ndarray, edges: np.ndarray, limit: int, seed: int, center, h: float):
        self.X, self.vals, self.edges = X, vals, edges
        self.exhaustive = X.shape[0] <= limit
        self.seed, self.center, self.h = seed, np.asarray(center, float), h

    def blocks(self):
        M = self.X.shape[0]
        if self.exhaustive:
            for a in range(0, M, BLOCK):
                b = min(a + BLOCK, M)
                I, J = np.nonzero(np.arange(a, b)[:, None] < np.arange(M)[None, :])
                yield I + a, J
            return
        # nearest neighbours along each axis and antipodal partners through the center
        key = {tuple(np.rint(x / self.h).astype(np.int64)): k for k, x in enumerate(self.X)}
        n = self.X.shape[1]
        for s in range(n):
            e = np.zeros(n)
            e[s] = self.h
            I, J = [], []
            for k, x in enumerate(self.X):
                j = key.get(tuple(np.rint((x + e) / self.h).astype(np.int64)))
                if j is not None:
                    I.append(k)
                    J.append(j)
            yield np.array(I, np.intp), np.array(J, np.intp)
        I, J = [], []
        for k, x in enumerate(self.X):
            j = key.get(tuple(np.rint((2 * self.center - x) / self.h).astype(np.int64)))
            if j is not None and j > k:
                I.append(k)
                J.append(j)
        yield np.array(I, np.intp), np.array(J, np.intp)
        # random pairs, capped per distance bin
        rng = np.random.default_rng([int(seed_u64(self.seed)), 7])
        nb = self.edges.size - 1
        quota = np.full(nb, SAMPLED_PAIRS_PER_BIN)
        for _ in range(200):
            if np.all(quota <= 0):
                break
            I = rng.integers(0, M, 200000)
            J = rng.integers(0, M, 200000)
            d = np.linalg.norm(self.X[I] - self.X[J], axis=1)
            b = np.searchsorted(self.edges, d, side="right") - 1
            ok = (I != J) & (b >= 0) & (b < nb)
            I, J, b = I[ok], J[ok], b[ok]
            order = np.argsort(b, kind="stable")
            I, J, b = I[order], J[order], b[order]
            rank = np.arange(b.size) - np.searchsorted(b, b, side="left")
            take = rank < quota[b]
            quota -= np.bincount(b[take], minlength=nb)
            yield I[take], J[take]


def seed_u64(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


def _scan(u, center, r, edges, limit, seed):
    idx = _ball_nodes(u, center, r)
    if idx.size < 2:
        raise DegenerateInput(f"ball of radius {r} holds {idx.size} lattice nodes; need at least 2")
    X = u.lattice.coords()[idx]
    vals = u.values[idx]
    return idx, X, vals, _PairScan(X, vals, edges, limit, seed, center, u.lattice.h)


def holder_ratio(
    u: GridFunction, center, r: float, delta: float, eps: float, *,
    bins=DEFAULT_BINS, exhaustive_limit: int | None = None, seed: int = 0,
) -> HolderReport:
    """Sup over node pairs in ``B_r`` of ``|u(x) - u(z)|`` against the Hölder bound.

    The denominator is ``||u||_{B_2r} (|x - z|^delta + eps^delta) / r^delta``
    with the sup norm over lattice nodes.  Pairs are enumerated exhaustively
    when ``B_r`` holds at most ``41^n`` nodes, otherwise a stratified
    subsample is used that always contains axis neighbours and antipodal
    pairs.
    """
    if not 0 < delta < 0.5:
        raise InvalidInput(f"delta must lie in (0, 1/2), got {delta!r}")
    if not r > 0 or not eps > 0:
        raise InvalidInput("r and eps must be > 0")
    lat = u.lattice
    limit = 41**lat.n if exhaustive_limit is None else int(exhaustive_limit)
    big = _ball_nodes(u, center, 2 * r)
    edges = _edges(bins, 2 * r, lat.h)
    _, X, vals, scan = _scan(u, center, r, edges, limit, seed)
    sup_norm = float(np.max(np.abs(u.values[big])))
    nb = edges.size - 1
    bin_max = np.zeros(nb)
    bin_cnt = np.zeros(nb, np.int64)
    best, arg, pairs = 0.0, None, 0
    scale = r**delta / sup_norm if sup_norm > 0 else 0.0
    for I, J in scan.blocks():
        if I.size == 0:
            continue
        pairs += I.size
        d = np.linalg.norm(X[I] - X[J], axis=1)
        diff = np.abs(vals[I] - vals[J])
        ratio = diff * scale / (d**delta + eps**delta)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, arg = float(ratio[k]), (I[k], J[k])
        b = np.searchsorted(edges, d, side="right") - 1
        ok = (b >= 0) & (b < nb)
        np.maximum.at(bin_max, b[ok], diff[ok])
        bin_cnt += np.bincount(b[ok], minlength=nb)
    table = [(float(edges[k]), float(edges[k + 1]), float(bin_max[k]), int(bin_cnt[k])) for k in range(nb) if bin_cnt[k] > 0]
    return HolderReport(
        delta=float(delta), r=float(r), eps=float(eps), ratio_sup=best,
        argmax_x=None if arg is None else X[arg[0]].copy(),
        argmax_z=None if arg is None else X[arg[1]].copy(),
        sup_norm=sup_norm, nodes=int(X.shape[0]), pairs=int(pairs), exhaustive=scan.exhaustive, bins=table,
    )


def modulus_profile(u: GridFunction, center, r: float, bins=DEFAULT_BINS, *, exhaustive_limit: int | None = None, seed: int = 0):
    """Per distance bin, the largest ``|u(x) - u(z)|`` over node pairs in ``B_r``.

    Returns rows ``(bin_lo, bin_hi, max_diff, pair_count, cummax_diff)``;
    bins without pairs are omitted.
    """
    lat = u.lattice
    limit = 41**lat.n if exhaustive_limit is None else int(exhaustive_limit)
    edges = _edges(bins, 2 * r, lat.h)
    _, X, vals, scan = _scan(u, center, r, edges, limit, seed)
    nb = edges.size - 1
    bin_max = np.zeros(nb)
    bin_cnt = np.zeros(nb, np.int64)
    for I, J in scan.blocks():
        if I.size == 0:
            continue
        d = np.linalg.norm(X[I] - X[J], axis=1)
        diff = np.abs(vals[I] - vals[J])
        b = np.searchsorted(edges, d, side="right") - 1
        ok = (b >= 0) & (b < nb)
        np.maximum.at(bin_max, b[ok], diff[ok])
        bin_cnt += np.bincount(b[ok], minlength=nb)
    rows = []
    run = 0.0
    for k in range(nb):
        if bin_cnt[k] == 0:
            continue
        run = max(run, float(bin_max[k]))
        rows.append((float(edges[k]), float(edges[k + 1]), float(bin_max[k]), int(bin_cnt[k]), run))
    return rows


def profile_slope(rows, upto: float | None = None) -> float:
    """Least-squares slope of log cummax_diff against log bin center."""
    a = np.array([(math.sqrt(lo * hi), cm) for lo, hi, _, _, cm in rows if cm > 0 and (upto is None or hi <= upto)])
    if a.shape[0] < 2:
        raise DegenerateInput("need at least two nonempty bins for a slope")
    return float(np.polyfit(np.log(a[:, 0]), np.log(a[:, 1]), 1)[0])


HOLDER_CSV_HEADER = ["bin_lo", "bin_hi", "max_diff", "pair_count", "cummax_diff"]


def write_profile_csv(path, rows):
    return io.write_csv(path, HOLDER_CSV_HEADER, rows)
