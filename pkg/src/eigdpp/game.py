"""Monte Carlo playouts of the eigenvalue tug-of-war games.

Trajectories advance in lockstep batches.  Every random draw is a hash of
``(seed, trajectory, step, stream)``, so a trajectory's path does not depend
on batch size, thread count or evaluation order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .eig_core import AlphaWeights
from .errors import InvalidInput, NonTerminating
from .frames import DirectionPool, FrameFamily
from .grid import BoundaryPayoff, GridFunction, Lattice

DEFAULT_STEP_CAP = 10**7
ROLES = ("subspace_picker", "vector_picker", "coin_winner")
POLICIES = ("greedy", "random", "fixed")

# random streams
_J, _SUB, _VEC, _COIN, _SIGN = range(5)
_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed: int, traj: np.ndarray, step: int, stream: int) -> np.ndarray:
    """Uniform doubles in [0, 1) keyed by (seed, trajectory, step, stream)."""
    t = np.asarray(traj, dtype=np.uint64)
    h = _mix(np.full(t.shape, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)))
    h = _mix(h ^ t)
    h = _mix(h ^ np.uint64(int(step) & 0xFFFFFFFFFFFFFFFF))
    h = _mix(h ^ np.uint64(stream))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class Strategy:
    """A player's policy.

    ``greedy`` evaluates candidates on ``field`` through the second
    difference; ``random`` picks uniformly; ``fixed`` always prefers the
    candidate best aligned with ``direction``.
    """

    role: str
    policy: str = "random"
    field: GridFunction | None = None
    direction: tuple | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidInput(f"role must be one of {ROLES}, got {self.role!r}")
        if self.policy not in POLICIES:
            raise InvalidInput(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.policy == "greedy" and self.field is None:
            raise InvalidInput("greedy strategy needs a value field")
        if self.policy == "fixed" and self.direction is None:
            raise InvalidInput("fixed strategy needs a direction")


@dataclass
class TrajectoryRecord:
    positions: np.ndarray
    choices: list = field(default_factory=list)  # (j, subspace id, v, sign)
    exit_point: np.ndarray | None = None
    payoff: float = math.nan
    steps: int = 0

    def rows(self, traj: int = 0):
        """CSV rows: traj, step, x1..xn, j, sign (step 0 has j = sign = 0)."""
        out = [[traj, 0, *self.positions[0], 0, 0]]
        for k, (j, _, _, s) in enumerate(self.choices):
            out.append([traj, k + 1, *self.positions[k + 1], j, s])
        return out


class _Game:
    """Shared state for batched playouts of one game configuration."""

    def __init__(self, kind, G, eps, frames, weights, s1, s2, lattice_box, cap):
        self.kind = kind
        self.G = G
        self.eps = float(eps)
        self.frames = frames
        self.n = frames.n
        self.weights = weights
        self.s1, self.s2 = s1, s2
        self.lo, self.hi = lattice_box
        self.cap = int(cap)
        dims = set(weights.active()) if kind == "general" else {1, self.n}
        self.pool = DirectionPool(frames, dims)
        self.dirs = self.pool.directions
        self.padded = {j: _pad(subs) for j, subs in self.pool.subspaces.items()}
        greedy = [s.field for s in (s1, s2) if s.policy == "greedy"]
        if len({id(f) for f in greedy}) > 1:
            raise InvalidInput("greedy players must share one value field")
        self.greedy_field = greedy[0] if greedy else None

    def payoff(self, X):
        if self.G.fn is not None:
            return self.G(X)
        raise InvalidInput("game payoff needs a closed-form BoundaryPayoff")

    def second_diffs(self, X) -> np.ndarray:
        u = self.greedy_field
        D = np.empty((self.dirs.shape[0], X.shape[0]))
        for k, v in enumerate(self.dirs):
            D[k] = 0.5 * (u.interpolate(X + self.eps * v) + u.interpolate(X - self.eps * v))
        return D

    def pick_subspace(self, s: Strategy, j: int, D, ids, step, stream, minimize=True):
        subs, pad = self.padded[j]
        S = pad.shape[0]
        if s.policy == "random":
            return np.minimum((counter_uniform(self.seed, ids, step, stream) * S).astype(np.intp), S - 1)
        if s.policy == "fixed":
            d = np.asarray(s.direction, float)
            score = np.array([np.max(np.abs(self.dirs[idx] @ d)) for idx in subs])
            return np.full(ids.size, int(np.argmax(score)), np.intp)
        vals = np.where(pad[:, :, None] >= 0, D[np.maximum(pad, 0)], -np.inf).max(axis=1)
        return np.argmin(vals, axis=0) if minimize else np.argmax(vals, axis=0)

    def pick_vector(self, s: Strategy, j: int, sub: np.ndarray, D, ids, step, stream, maximize=True):
        _, pad = self.padded[j]
        rows = pad[sub]  # (P, L)
        valid = rows >= 0
        if s.policy == "random":
            cnt = valid.sum(axis=1)
            k = np.minimum((counter_uniform(self.seed, ids, step, stream) * cnt).astype(np.intp), cnt - 1)
            return rows[np.arange(rows.shape[0]), k]
        if s.policy == "fixed":
            d = np.asarray(s.direction, float)
            score = np.where(valid, np.abs(self.dirs[np.maximum(rows, 0)] @ d), -np.inf)
            return rows[np.arange(rows.shape[0]), np.argmax(score, axis=1)]
        vals = D[np.maximum(rows, 0), np.arange(rows.shape[0])[:, None]]
        vals = np.where(valid, vals if maximize else -vals, -np.inf)
        return rows[np.arange(rows.shape[0]), np.argmax(vals, axis=1)]

    def run(self, x0, ids: np.ndarray, seed: int, record: bool):
        self.seed = int(seed)
        P = ids.size
        X = np.tile(np.asarray(x0, float), (P, 1))
        payoff = np.full(P, np.nan)
        steps = np.zeros(P, np.int64)
        recs = [TrajectoryRecord(positions=None) for _ in range(P)] if record else None
        paths = [[X[i].copy()] for i in range(P)] if record else None
        active = np.arange(P)
        cum = np.cumsum(self.weights.alphas) if self.kind == "general" else None
        step = 0
        while active.size:
            if step >= self.cap:
                raise NonTerminating(f"{active.size} trajectories still running after {self.cap} steps")
            tid = ids[active]
            Xa = X[active]
            D = self.second_diffs(Xa) if self.greedy_field is not None else None
            v_idx = np.empty(active.size, np.intp)
            sub_idx = np.empty(active.size, np.intp)
            if self.kind == "general":
                uj = counter_uniform(self.seed, tid, step, _J)
                jj = np.minimum(np.searchsorted(cum, uj, side="right"), self.n - 1) + 1
                for j in np.unique(jj):
                    m = jj == j
                    Dm = None if D is None else D[:, m]
                    sub = self.pick_subspace(self.s1, j, Dm, tid[m], step, _SUB, minimize=True)
                    sub_idx[m] = sub
                    v_idx[m] = self.pick_vector(self.s2, j, sub, Dm, tid[m], step, _VEC, maximize=True)
            else:
                coin = counter_uniform(self.seed, tid, step, _COIN) < 0.5
                jj = np.where(coin, self.n, 1)
                for j, s, maxi in ((self.n, self.s1, True), (1, self.s2, False)):
                    m = coin if maxi else ~coin
                    if not m.any():
                        continue
                    Dm = None if D is None else D[:, m]
                    if j == self.n:
                        sub = np.zeros(m.sum(), np.intp)
                    else:
                        # the minimizer picks the line with the smallest second difference
                        sub = self.pick_subspace(s, j, Dm, tid[m], step, _SUB, minimize=True)
                    sub_idx[m] = sub
                    v_idx[m] = self.pick_vector(s, j, sub, Dm, tid[m], step, _VEC, maximize=maxi)
            sign = np.where(counter_uniform(self.seed, tid, step, _SIGN) < 0.5, 1, -1)
            X[active] = Xa + (sign * self.eps)[:, None] * self.dirs[v_idx]
            step += 1
            steps[active] = step
            if record:
                for k, i in enumerate(active):
                    paths[i].append(X[i].copy())
                    recs[i].choices.append((int(jj[k]), int(sub_idx[k]), self.dirs[v_idx[k]].copy(), int(sign[k])))
            out = ~np.all((X[active] > self.lo) & (X[active] < self.hi), axis=1)
            if out.any():
                done = active[out]
                payoff[done] = self.payoff(X[done])
                active = active[~out]
        if record:
            for i, r in enumerate(recs):
                r.positions = np.array(paths[i])
                r.exit_point = X[i].copy()
                r.payoff = float(payoff[i])
                r.steps = int(steps[i])
        return payoff, steps, recs


def _pad(subs):
    L = max(len(s) for s in subs)
    pad = np.full((len(subs), L), -1, np.intp)
    for k, s in enumerate(subs):
        pad[k, : len(s)] = s
    return subs, pad


def _check_start(x0, box):
    x0 = np.asarray(x0, float)
    if not np.all((x0 > box[0]) & (x0 < box[1])):
        raise InvalidInput(f"x0={x0.tolist()} is not interior")
    return x0


def play_general(
    x0, G: BoundaryPayoff, w: AlphaWeights, eps: float, frames: FrameFamily,
    s1: Strategy, s2: Strategy, seed: int, *, box=(-1.0, 1.0), step_cap: int = DEFAULT_STEP_CAP,
    traj: int = 0,
) -> TrajectoryRecord:
    """One playout: draw j with probability alpha_j, Player I picks S, Player II picks v."""
    if s1.role != "subspace_picker" or s2.role != "vector_picker":
        raise InvalidInput("play_general needs a subspace_picker and a vector_picker")
    x0 = _check_start(x0, box)
    game = _Game("general", G, eps, frames, w, s1, s2, box, step_cap)
    return game.run(x0, np.array([traj]), seed, record=True)[2][0]


def play_extremal(
    x0, G: BoundaryPayoff, eps: float, s_max: Strategy, s_min: Strategy, seed: int,
    frames: FrameFamily | None = None, *, box=(-1.0, 1.0), step_cap: int = DEFAULT_STEP_CAP,
    traj: int = 0,
) -> TrajectoryRecord:
    """One playout of the coin-toss game: the toss winner picks the direction."""
    if s_max.role != "coin_winner" or s_min.role != "coin_winner":
        raise InvalidInput("play_extremal needs two coin_winner strategies")
    x0 = _check_start(x0, box)
    frames = FrameFamily.canonical(x0.size) if frames is None else frames
    game = _Game("extremal", G, eps, frames, AlphaWeights.extremal(frames.n), s_max, s_min, box, step_cap)
    return game.run(x0, np.array([traj]), seed, record=True)[2][0]


@dataclass
class Estimate:
    mean: float
    se: float
    trials: int
    seed: int

    def __iter__(self):
        return iter((self.mean, self.se, self.trials))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "trials": self.trials, "seed": self.seed}


def simulate_payoffs(
    x0, G: BoundaryPayoff, eps: float, frames: FrameFamily, s1: Strategy, s2: Strategy,
    trials: int, seed: int, *, variant: str = "general", weights: AlphaWeights | None = None,
    box=(-1.0, 1.0), threads: int = 1, chunk: int = 1024, step_cap: int = DEFAULT_STEP_CAP,
) -> tuple[np.ndarray, np.ndarray]:
    """Payoffs and exit times of ``trials`` trajectories, in trajectory order."""
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    if threads < 1:
        raise InvalidInput("threads must be >= 1")
    x0 = _check_start(x0, box)
    if variant == "general":
        if weights is None:
            raise InvalidInput("general game needs weights")
        kind = "general"
    elif variant == "extremal":
        weights = AlphaWeights.extremal(frames.n)
        kind = "extremal"
    else:
        raise InvalidInput(f"unknown game variant {variant!r}")
    ids = np.arange(trials, dtype=np.int64)
    chunks = [ids[k:k + chunk] for k in range(0, trials, chunk)]
    payoff = np.empty(trials)
    steps = np.empty(trials, np.int64)

    def work(c):
        game = _Game(kind, G, eps, frames, weights, s1, s2, box, step_cap)
        p, s, _ = game.run(x0, c, seed, record=False)
        payoff[c] = p
        steps[c] = s

    if threads == 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, chunks))
    return payoff, steps


def estimate_value(
    x0, G: BoundaryPayoff, eps: float, frames: FrameFamily, s1: Strategy, s2: Strategy,
    trials: int, seed: int = 0, **kw,
) -> Estimate:
    """Sample mean and standard error of the payoff over independent playouts."""
    payoff, _ = simulate_payoffs(x0, G, eps, frames, s1, s2, trials, seed, **kw)
    se = float(np.std(payoff, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return Estimate(float(np.mean(payoff)), se, int(trials), int(seed))


def trajectories_csv_rows(records: list[TrajectoryRecord]):
    rows = []
    for t, r in enumerate(records):
        rows.extend(r.rows(t))
    return rows


def write_trajectories_csv(path, records: list[TrajectoryRecord], n: int):
    header = ["traj", "step"] + [f"x{k + 1}" for k in range(n)] + ["j", "sign"]
    return io.write_csv(path, header, trajectories_csv_rows(records))
