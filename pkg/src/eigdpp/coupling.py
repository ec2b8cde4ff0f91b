"""Coupled two-token machinery and sampled checks of the barrier inequalities.

Pairs ``(x, z)`` move together; ``y = x - z``.  The barrier is
``f = f1 - f2`` with ``f1 = C |y|^delta + |x + z|^2`` and ``f2`` a ladder of
values ``C^(2(N - i)) eps^delta`` on the annuli
``A_i = {(i - 1) eps/10 < |y| <= i eps/10}``.

Theorem-scale constants make ``f2`` astronomically large, so every check in
the ladder regime runs on logarithms, and every ``F(f1) - f1`` uses
cancellation-free difference formulas.  Sampled suprema only bound the true
suprema from below; the reports say so.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import io
from .eig_core import AlphaWeights
from .errors import DegenerateState, InvalidInput, PreconditionViolated
from .dpp_operator import ball_quadrature

RULE_I = "rule_i"
RULE_II = "rule_ii"
CHUNK = 256
NOTE = "empirical, not certified: suprema over (v, w) are sampled"
# |y| below this fraction of eps/10 is treated as the diagonal A_0
DIAGONAL_FRACTION = 1e-9


@dataclass(frozen=True)
class CoupledState:
    x: np.ndarray
    z: np.ndarray

    def __init__(self, x, z):
        x = np.array(x, dtype=float)
        z = np.array(z, dtype=float)
        if x.shape != z.shape or x.ndim != 1:
            raise InvalidInput("x and z must be vectors of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise InvalidInput("x and z must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def y(self) -> np.ndarray:
        return self.x - self.z

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class BarrierParams:
    delta: float
    C: float
    N: int
    C_tilde: float

    def __post_init__(self):
        if not 0 < self.delta < 0.5:
            raise InvalidInput(f"delta must lie in (0, 1/2), got {self.delta!r}")
        if not self.C > 1:
            raise InvalidInput(f"C must be > 1, got {self.C!r}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInput(f"N must be a positive integer, got {self.N!r}")
        if not self.C_tilde > 0:
            raise InvalidInput(f"C_tilde must be > 0, got {self.C_tilde!r}")

    @property
    def log_C(self) -> float:
        return math.log(self.C)

    def near_radius(self, eps: float) -> float:
        return self.N * eps / 10.0


@dataclass(frozen=True)
class DominativeBarrierParams:
    """Constants for the ball-average coupling: ``C = 1e10 / (delta^2 omega)``."""

    delta: float
    omega: float
    n: int
    p: float = 2.0

    def __post_init__(self):
        if not 0 < self.delta < 0.1:
            raise InvalidInput(f"delta must lie in (0, 1/10), got {self.delta!r}")
        if self.n < 1:
            raise InvalidInput("n must be >= 1")
        if not 0 < self.omega <= 4.0 ** (-self.n):
            raise InvalidInput(f"omega must lie in (0, 4^-n] = (0, {4.0 ** -self.n}], got {self.omega!r}")
        if not self.p >= 2:
            raise InvalidInput(f"p must be >= 2, got {self.p!r}")

    @property
    def C(self) -> float:
        return 1e10 / (self.delta**2 * self.omega)

    @property
    def N(self) -> int:
        return int(math.ceil(100.0 * self.C / self.delta))

    @property
    def q(self) -> float:
        return (self.n + 2) / (self.n + self.p)

    @property
    def C_tilde_branches(self) -> tuple[float, float]:
        C, d, n = self.C, self.delta, self.n
        return 0.25 * (C * d / (4 * (n + 2)) - 10.0), C * C / 4.0**n - 3.0 * C - 1.0

    @property
    def C_tilde(self) -> float:
        return min(self.C_tilde_branches)

    @property
    def target_coefficient(self) -> float:
        """``-q C_tilde + 4(1 - q)``; must be negative."""
        return -self.q * self.C_tilde + 4.0 * (1.0 - self.q)

    def barrier(self) -> BarrierParams:
        return BarrierParams(self.delta, self.C, self.N, self.C_tilde)


def K_bound(y_norm: float, eps: float, dbp: DominativeBarrierParams) -> float:
    """Piecewise constant K of the restated mean-value estimate."""
    C, d, n = dbp.C, dbp.delta, dbp.n
    if y_norm > dbp.N * eps / 10.0:
        return y_norm ** (d - 2) * (10.0 - C * d / (4 * (n + 2)))
    return -C * C / 4.0**n + 3.0 * C + 1.0


# -- geometry ----------------------------------------------------------------

def _nonzero(y) -> np.ndarray:
    y = np.asarray(y, float)
    if not np.any(y != 0):
        raise DegenerateState("y = x - z vanishes; projections onto y are undefined")
    return y


def perp_component(v, y) -> np.ndarray:
    """``v - (<v, y> / <y, y>) y``."""
    y = _nonzero(y)
    v = np.asarray(v, float)
    return v - (v @ y) / (y @ y) * y


def select_rule(v, w, y) -> str:
    vp, wp = perp_component(v, y), perp_component(w, y)
    if vp @ vp + wp @ wp > 1 and vp @ wp < 0:
        return RULE_II
    return RULE_I


def _rule_ii_mask(V, W, y) -> np.ndarray:
    """Vectorized rule selection for direction arrays ``V, W`` of shape (..., n)."""
    yy = y @ y
    Vp = V - (V @ y)[..., None] / yy * y
    Wp = W - (W @ y)[..., None] / yy * y
    return (np.sum(Vp * Vp, -1) + np.sum(Wp * Wp, -1) > 1) & (np.sum(Vp * Wp, -1) < 0)


def moved_difference(v, w, y) -> tuple[str, np.ndarray]:
    """Selected rule and the difference direction ``d`` it moves ``y`` along."""
    rule = select_rule(v, w, y)
    v, w = np.asarray(v, float), np.asarray(w, float)
    return rule, (v + w if rule == RULE_II else v - w)


def F_eval(s: CoupledState, v, w, g, eps: float) -> float:
    """Averaged coupled step of a pair function ``g(x, z)`` under the selected rule."""
    rule = select_rule(v, w, s.y)
    b = -np.asarray(w, float) if rule == RULE_II else np.asarray(w, float)
    a = np.asarray(v, float)
    return 0.5 * (float(g(s.x + eps * a, s.z + eps * b)) + float(g(s.x - eps * a, s.z - eps * b)))


def mirror_map(h, s: CoupledState) -> np.ndarray:
    """Reflection of ``h`` across the hyperplane orthogonal to ``y``."""
    y = _nonzero(s.y)
    h = np.asarray(h, float)
    return h - 2.0 * (h @ y) / (y @ y) * y


# -- barrier -----------------------------------------------------------------

def barrier_f1(s: CoupledState, bp: BarrierParams) -> float:
    y, t = s.y, s.x + s.z
    return bp.C * float(np.linalg.norm(y)) ** bp.delta + float(t @ t)


def annulus_index_of(r, eps: float, N: int, diagonal_tol: float = 0.0):
    """Annulus index for distances ``r`` (array): 0 on the diagonal, -1 past ``N``."""
    r = np.asarray(r, float)
    i = np.ceil(10.0 * r / eps)
    # the quotient can round across a bin edge; settle against the edges themselves
    i = np.where((i - 1) * eps / 10.0 >= r, i - 1, i)
    i = np.where(i * eps / 10.0 < r, i + 1, i)
    i = np.where(r <= diagonal_tol * eps / 10.0, 0.0, np.maximum(i, 1.0))
    return np.where(i > N, -1, i).astype(np.int64)


def annulus_index(s: CoupledState, eps: float, N: int) -> int | None:
    """Smallest ``i`` in ``0..N`` with ``(i-1) eps/10 < |y| <= i eps/10``; None past ``N``."""
    i = int(annulus_index_of(np.linalg.norm(s.y), eps, N))
    return None if i < 0 else i


def log_f2_index(i, bp: BarrierParams, eps: float):
    """``ln f2`` for annulus indices (``-inf`` where ``i < 0`` i.e. beyond ``N``)."""
    i = np.asarray(i)
    val = 2.0 * (bp.N - i) * bp.log_C + bp.delta * math.log(eps)
    return np.where(i < 0, -np.inf, val)


def barrier_f2(s: CoupledState, bp: BarrierParams, eps: float, log_domain: bool = False) -> float:
    i = annulus_index(s, eps, bp.N)
    if i is None:
        return -math.inf if log_domain else 0.0
    lv = float(log_f2_index(i, bp, eps))
    if log_domain:
        return lv
    try:
        return bp.C ** (2 * (bp.N - i)) * eps**bp.delta
    except OverflowError:
        return math.inf  # use log_domain at theorem scale


def taylor_f1(s: CoupledState, h_x, h_z, bp: BarrierParams) -> float:
    """Second-order expansion of ``f1(x + h_x, z + h_z)`` around ``(x, z)``."""
    y = _nonzero(s.y)
    r = float(np.linalg.norm(y))
    hx, hz = np.asarray(h_x, float), np.asarray(h_z, float)
    d, t = hx - hz, hx + hz
    dV = d @ y / r
    dperp2 = d @ d - dV * dV
    C, de = bp.C, bp.delta
    return (
        barrier_f1(s, bp)
        + C * de * r ** (de - 1) * dV
        + 2.0 * (s.x + s.z) @ t
        + 0.5 * C * de * r ** (de - 2) * ((de - 1) * dV * dV + dperp2)
        + t @ t
    )


def raw_error_bound(s: CoupledState, h_norm: float, eps: float, bp: BarrierParams) -> float:
    """``C |(h_x, h_z)|^3 (|y| - 2 eps)^(delta - 3)``, valid for ``|y| > 2 eps``."""
    r = float(np.linalg.norm(s.y))
    if r <= 2 * eps:
        raise PreconditionViolated(f"|x - z| = {r} must exceed 2 eps = {2 * eps}")
    return bp.C * h_norm**3 * (r - 2 * eps) ** (bp.delta - 3)


def error_bound(s: CoupledState, eps: float, bp: BarrierParams) -> float:
    """Refined remainder bound ``10 eps^2 |y|^(delta - 2)`` for the far regime."""
    r = float(np.linalg.norm(s.y))
    if r <= 2 * eps:
        raise PreconditionViolated(f"|x - z| = {r} must exceed 2 eps = {2 * eps}")
    if r <= bp.near_radius(eps):
        raise PreconditionViolated(f"|x - z| = {r} must exceed N eps / 10 = {bp.near_radius(eps)}")
    if bp.N < 100 * bp.C / bp.delta:
        raise PreconditionViolated("refined bound needs N >= 100 C / delta")
    return 10.0 * eps**2 * r ** (bp.delta - 2)


def choose_constants(delta: float, C_tilde: float) -> BarrierParams:
    """``C`` solving ``2 C delta^2 - C delta + 20 = -(C_tilde + 4) / 4^(delta - 2)``; ``N = ceil(100 C / delta)``."""
    if not 0 < delta < 0.5:
        raise InvalidInput(f"delta must lie in (0, 1/2), got {delta!r}")
    if not C_tilde > 0:
        raise InvalidInput(f"C_tilde must be > 0, got {C_tilde!r}")
    C = ((C_tilde + 4.0) / 4.0 ** (delta - 2) + 20.0) / (delta - 2.0 * delta**2)
    lhs = 2 * C * delta**2 - C * delta + 20.0
    rhs = -(C_tilde + 4.0) / 4.0 ** (delta - 2)
    if abs(lhs - rhs) > 1e-9 * max(1.0, abs(rhs)):
        raise AssertionError(f"constant identity failed: {lhs} != {rhs}")  # pragma: no cover
    return BarrierParams(float(delta), float(C), int(math.ceil(100.0 * C / delta)), float(C_tilde))


def feasibility_bound(weights: AlphaWeights) -> float:
    """Smallest ``C_tilde`` with ``-C_tilde alpha + 4 beta <= 0``."""
    return 4.0 * weights.beta / weights.alpha


def ladder_factor(weights: AlphaWeights | None = None) -> float:
    """Multiple of ``C eps^delta`` the f2 step must beat (6 in the extremal case)."""
    if weights is None or weights.beta == 0:
        return 6.0
    return 8.0 * (1.0 - weights.alpha) / weights.alpha + 6.0


# -- stable coupled differences ------------------------------------------------

def _even_power_excess(b, c, a):
    """``((1 + c + b)^a + (1 + c - b)^a) / 2 - 1`` without cancellation.

    With ``m`` the mean and ``h`` the half difference of the two logarithms
    the value is ``expm1(m) cosh(h) + 2 sinh(h/2)^2``; the first-order terms
    in ``b`` never get formed.  Falls back to the direct form if a base is
    not positive.
    """
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    ok = np.abs(b) < 1.0 + c
    with np.errstate(divide="ignore", invalid="ignore"):
        m = 0.5 * a * np.log1p(2.0 * c + c * c - b * b)
        h = a * np.arctanh(np.where(ok, b / (1.0 + c), 0.0))
        stable = np.expm1(m) * np.cosh(h) + 2.0 * np.sinh(0.5 * h) ** 2
        tp = np.maximum(c + b, -1.0)
        tm = np.maximum(c - b, -1.0)
        direct = 0.5 * (np.expm1(a * np.log1p(tp)) + np.expm1(a * np.log1p(tm)))
    return np.where(ok, stable, direct)


def delta_F_f1(y, A, B, eps: float, bp: BarrierParams) -> np.ndarray:
    """``F(f1) - f1`` for moves ``(x, z) +- eps (a, b)``, without cancellation.

    ``y`` has shape (n,); ``A, B`` shape (..., n).  The first-order terms
    cancel exactly in the antipodal average and are dropped, so the result
    does not depend on ``x + z``.
    """
    y = np.asarray(y, float)
    D = A - B
    S = A + B
    yy = float(y @ y)
    yd = D @ y
    dd = np.sum(D * D, -1)
    b = 2.0 * eps * yd / yy
    c = eps * eps * dd / yy
    return bp.C * yy ** (0.5 * bp.delta) * _even_power_excess(b, c, 0.5 * bp.delta) + eps * eps * np.sum(S * S, -1)


def coupled_moves(y, V, W) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partner directions ``(a, b)`` under the selected rule, and the rule-ii mask."""
    ii = _rule_ii_mask(V, W, y)
    B = np.where(ii[..., None], -W, W)
    return V, B, ii


def F_f1_minus_f1(y, V, W, eps, bp) -> np.ndarray:
    A, B, _ = coupled_moves(y, V, W)
    return delta_F_f1(y, A, B, eps, bp)


def _orthonormal_completion(yhat: np.ndarray) -> np.ndarray:
    """Rows: an orthonormal basis of the complement of ``yhat`` (deterministic)."""
    n = yhat.size
    q, _ = np.linalg.qr(np.column_stack([yhat, np.eye(n)]))
    return q[:, 1:n].T


def structured_candidates(y) -> tuple[np.ndarray, np.ndarray]:
    """Worst-case direction pairs identified by the coupling argument."""
    y = _nonzero(y)
    yh = y / np.linalg.norm(y)
    P = _orthonormal_completion(yh)
    V, W = [yh, -yh, yh], [-yh, yh, yh]
    if P.shape[0] >= 1:
        p = P[0]
        V += [p, p, p, (yh + p) / math.sqrt(2), (yh + p) / math.sqrt(2)]
        W += [p, -p, yh, (-yh + p) / math.sqrt(2), (-yh - p) / math.sqrt(2)]
    if P.shape[0] >= 2:
        q = P[1]
        V += [p, p, (p + q) / math.sqrt(2)]
        W += [q, -q, (p - q) / math.sqrt(2)]
    return np.array(V), np.array(W)


def step_down_pair(y, eps: float, target: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule-i pair moving ``|y|`` to ``target`` on the ``+`` branch.

    ``v = -(t/2eps) yhat + s p`` and ``w = (t/2eps) yhat + s p`` with
    ``t = |y| - target`` and ``p`` orthogonal to ``y``; needs ``n >= 2`` and
    ``0 <= t <= 2 eps``.
    """
    y = _nonzero(y)
    r = float(np.linalg.norm(y))
    yh = y / r
    t = r - target
    c = t / (2.0 * eps)
    if not -1e-12 <= c <= 1.0 + 1e-12:
        raise PreconditionViolated(f"cannot move |y| from {r} to {target} in one step of size {eps}")
    c = min(max(c, 0.0), 1.0)
    P = _orthonormal_completion(yh)
    if P.shape[0] == 0:
        raise PreconditionViolated("step-down pair needs n >= 2")
    s = math.sqrt(max(1.0 - c * c, 0.0))
    return -c * yh + s * P[0], c * yh + s * P[0]


def random_unit(rng: np.random.Generator, shape) -> np.ndarray:
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


# -- sampling of coupled states -------------------------------------------------

def _uniform_ball(rng, count, n):
    d = random_unit(rng, (count, n))
    return d * rng.random(count)[:, None] ** (1.0 / n)


def sample_far(n: int, count: int, seed: int, min_dist: float) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ``(x, z)`` in ``B_1 x B_1`` conditioned on ``|x - z| > min_dist``."""
    if min_dist >= 2.0:
        raise InvalidInput(f"far regime |x - z| > {min_dist} is empty inside B_1 x B_1")
    rng = np.random.default_rng([int(seed), 1])
    xs, zs = [], []
    got = 0
    while got < count:
        x = _uniform_ball(rng, 2 * count, n)
        z = _uniform_ball(rng, 2 * count, n)
        keep = np.linalg.norm(x - z, axis=1) > min_dist
        xs.append(x[keep])
        zs.append(z[keep])
        got += int(keep.sum())
    return np.concatenate(xs)[:count], np.concatenate(zs)[:count]


def sample_near(n: int, count: int, seed: int, eps: float, i_lo: int, i_hi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """States with annulus index uniform in ``[i_lo, i_hi]`` and ``x, z`` in ``B_1``."""
    if not 1 <= i_lo <= i_hi:
        raise InvalidInput("annulus range must satisfy 1 <= i_lo <= i_hi")
    rng = np.random.default_rng([int(seed), 2])
    idx = rng.integers(i_lo, i_hi + 1, size=count)
    # (i - 1 + U) eps/10 with U in (0, 1]
    r = (idx - 1 + (1.0 - rng.random(count))) * eps / 10.0
    if np.any(r >= 2.0):
        raise InvalidInput("requested annuli do not fit inside B_1 x B_1")
    d = random_unit(rng, (count, n))
    x = _uniform_ball(rng, count, n) * np.maximum(0.0, 1.0 - r)[:, None]
    z = x - r[:, None] * d
    return x, z, idx


# -- reports --------------------------------------------------------------------

@dataclass
class CheckReport:
    check: str
    samples: int
    violations: int
    worst_margin: float
    target: float
    regime_counts: dict
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    margins: np.ndarray | None = field(default=None, repr=False)
    note: str = NOTE

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "samples": self.samples,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "target": self.target,
            "regime_counts": dict(self.regime_counts),
            "params": dict(self.params),
            "details": dict(self.details),
            "note": self.note,
        }

    def write_json(self, path):
        return io.write_json(path, self.to_dict())

    def write_csv(self, path):
        m = np.asarray(self.margins if self.margins is not None else [])
        return io.write_csv(path, ["sample", "margin"], [[k, v] for k, v in enumerate(m)])


def _chunked(fn, count: int, threads: int):
    starts = list(range(0, count, CHUNK))
    if threads <= 1 or len(starts) <= 1:
        parts = [fn(s, min(s + CHUNK, count)) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda s: fn(s, min(s + CHUNK, count)), starts))
    return parts


# -- far regime: sup/inf margin ------------------------------------------------

def extremal_margins(xs, zs, bp: BarrierParams, eps: float, direction_budget: int, seed: int, threads: int = 1) -> np.ndarray:
    """``(1/2 sup F(f1) + 1/2 inf F(f1) - f1) / eps^2`` per far-regime sample.

    ``f2`` vanishes at far states and is nonnegative everywhere, so using
    ``f1`` alone bounds the margin of ``f`` from above.
    """
    n = xs.shape[1]

    def work(lo, hi):
        rng = np.random.default_rng([int(seed), 3, lo])
        out = np.empty(hi - lo)
        for k in range(lo, hi):
            y = xs[k] - zs[k]
            Vs, Ws = structured_candidates(y)
            Vr = random_unit(rng, (direction_budget, n))
            Wr = random_unit(rng, (direction_budget, n))
            vals = F_f1_minus_f1(y, np.vstack([Vs, Vr]), np.vstack([Ws, Wr]), eps, bp)
            out[k - lo] = 0.5 * (vals.max() + vals.min()) / (eps * eps)
        return out

    return np.concatenate(_chunked(work, xs.shape[0], threads)) if xs.shape[0] else np.zeros(0)


# -- near regime: f1 jump and f2 ladder ---------------------------------------

def ladder_table(bp: BarrierParams, eps: float, factor: float = 6.0) -> dict:
    """Check ``1/2 f2(A_{i-1}) >= factor C eps^delta + 2 f2(A_i)`` for every ``i = 1..N`` in logs."""
    i = np.arange(1, bp.N + 1, dtype=np.int64)
    lhs = log_f2_index(i - 1, bp, eps) - math.log(2.0)
    rhs = bp.delta * math.log(eps) + np.logaddexp(math.log(factor * bp.C), math.log(2.0) + 2.0 * (bp.N - i) * bp.log_C)
    slack = lhs - rhs
    bad = int(np.count_nonzero(slack <= 0))
    return {"annuli": int(bp.N), "violations": bad, "min_log_slack": float(slack.min()), "argmin_annulus": int(i[np.argmin(slack)])}


def near_checks(xs, zs, bp: BarrierParams, eps: float, direction_budget: int, seed: int, factor: float = 6.0, threads: int = 1):
    """Per-sample log slack of the f2 ladder and normalized f1 jump.

    Returns ``(ladder_slack, jump)``: ``ladder_slack = ln sup F(f2) -
    ln(factor C eps^delta + 2 f2)`` (must be > 0) using the step-down pair,
    and ``jump = (sup F(f1) - f1) / (C eps^delta)`` (must be <= 3).
    """
    n = xs.shape[1]
    ce = bp.C * eps**bp.delta
    log_eps = math.log(eps)

    def work(lo, hi):
        rng = np.random.default_rng([int(seed), 4, lo])
        slack = np.empty(hi - lo)
        jump = np.empty(hi - lo)
        for k in range(lo, hi):
            y = xs[k] - zs[k]
            r = float(np.linalg.norm(y))
            i = int(annulus_index_of(r, eps, bp.N, DIAGONAL_FRACTION))
            target = 0.0 if i <= 1 else (i - 1.5) * eps / 10.0
            v, w = step_down_pair(y, eps, target)
            A, B, _ = coupled_moves(y, v[None], w[None])
            d = A[0] - B[0]
            r_plus = np.linalg.norm(y + eps * d)
            r_minus = np.linalg.norm(y - eps * d)
            lf = log_f2_index(annulus_index_of([r_plus, r_minus], eps, bp.N, DIAGONAL_FRACTION), bp, eps)
            log_sup = float(np.logaddexp(lf[0], lf[1])) - math.log(2.0)
            log_rhs = bp.delta * log_eps + float(np.logaddexp(math.log(factor * bp.C), math.log(2.0) + 2.0 * (bp.N - i) * bp.log_C))
            slack[k - lo] = log_sup - log_rhs
            Vs, Ws = structured_candidates(y)
            Vr = random_unit(rng, (direction_budget, n))
            Wr = random_unit(rng, (direction_budget, n))
            vals = F_f1_minus_f1(y, np.vstack([Vs, Vr, v]), np.vstack([Ws, Wr, w]), eps, bp)
            jump[k - lo] = vals.max() / ce
        return slack, jump

    parts = _chunked(work, xs.shape[0], threads)
    if not parts:
        return np.zeros(0), np.zeros(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _split_regimes(xs, zs, bp, eps):
    r = np.linalg.norm(xs - zs, axis=1)
    diag = r <= DIAGONAL_FRACTION * eps / 10.0
    far = (r > bp.near_radius(eps)) & ~diag
    near = ~far & ~diag
    return diag, near, far


def check_extremal_inequality(
    samples, bp: BarrierParams, eps: float, direction_budget: int = 1000, seed: int = 0,
    threads: int = 1, weights: AlphaWeights | None = None,
) -> CheckReport:
    """Sampled check of the half-sup/half-inf barrier inequality.

    Far states (``|y| > N eps/10``) must have margin ``< -C_tilde eps^2``.
    Near states must satisfy the f2 ladder and the f1 jump bound.  States on
    the diagonal are excluded and counted.
    """
    return _check_pairs(samples, bp, eps, direction_budget, seed, threads, weights, name="extremal")


def check_general_inequality(
    samples, bp: BarrierParams, weights: AlphaWeights, eps: float, frames=None,
    direction_budget: int = 1000, seed: int = 0, threads: int = 1,
) -> CheckReport:
    """The split-weight version: ``alpha`` times the extremal margin plus ``beta`` times the diagonal coupling."""
    return _check_pairs(samples, bp, eps, direction_budget, seed, threads, weights, name="general", frames=frames)


def _check_pairs(samples, bp, eps, direction_budget, seed, threads, weights, name, frames=None):
    xs, zs = (np.atleast_2d(np.asarray(a, float)) for a in samples)
    if xs.shape != zs.shape:
        raise InvalidInput("samples must be two arrays of equal shape")
    if xs.shape[1] < 2:
        raise InvalidInput("coupling checks need n >= 2")
    if not eps > 0:
        raise InvalidInput("eps must be > 0")
    diag, near, far = _split_regimes(xs, zs, bp, eps)
    general = weights is not None and weights.beta > 0
    alpha = weights.alpha if general else 1.0
    beta = weights.beta if general else 0.0
    target = -bp.C_tilde * alpha + 4.0 * beta
    factor = ladder_factor(weights if general else None)

    far_m = extremal_margins(xs[far], zs[far], bp, eps, direction_budget, seed, threads)
    details = {}
    if general:
        # diagonal coupling S = S~, v~ = v over the frame directions: F - f = 4 eps^2 identically
        dirs = np.eye(xs.shape[1]) if frames is None else np.vstack([f.T for f in frames.frames])
        diag_excess = np.array([
            float(np.max(delta_F_f1(xs[k] - zs[k], dirs, dirs, eps, bp))) / (eps * eps) for k in np.flatnonzero(far)[:50]
        ])
        details["diagonal_coupling_excess_over_eps2"] = float(diag_excess.max()) if diag_excess.size else 4.0
        far_m = alpha * far_m + beta * 4.0
        details["feasible"] = bool(target < 0)
    far_viol = far_m >= target

    slack, jump = near_checks(xs[near], zs[near], bp, eps, direction_budget, seed, factor, threads)
    near_viol = (slack <= 0) | (jump > 3.0)

    margins = np.full(xs.shape[0], np.nan)
    margins[far] = far_m
    viol = int(far_viol.sum() + near_viol.sum())
    details.update({
        "far_worst_margin_over_eps2": float(far_m.max()) if far_m.size else None,
        "near_min_ladder_log_slack": float(slack.min()) if slack.size else None,
        "near_max_f1_jump_over_C_eps_delta": float(jump.max()) if jump.size else None,
        "ladder_factor": factor,
        "far_violations": int(far_viol.sum()),
        "near_violations": int(near_viol.sum()),
    })
    return CheckReport(
        check=name,
        samples=int(xs.shape[0]),
        violations=viol,
        worst_margin=float(far_m.max()) if far_m.size else -math.inf,
        target=target,
        regime_counts={"diagonal": int(diag.sum()), "near": int(near.sum()), "far": int(far.sum())},
        params={"delta": bp.delta, "C": bp.C, "N": bp.N, "C_tilde": bp.C_tilde, "eps": eps,
                "direction_budget": int(direction_budget), "seed": int(seed), "alpha": alpha, "beta": beta},
        details=details,
        margins=margins,
    )


# -- dominative -------------------------------------------------------------------

def _log_abs1p(u: np.ndarray) -> np.ndarray:
    """``ln |1 + u|`` accurate for small ``u``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > -1.0, np.log1p(np.maximum(u, -1.0 + 1e-300)), np.log(np.abs(1.0 + u)))


def _log_pos_diff(la: float, lb: float) -> float:
    """``ln(e^la - e^lb)`` for ``la > lb``."""
    return la + math.log(-math.expm1(lb - la))


def dominative_sample(x, z, dbp: DominativeBarrierParams, eps: float, pts: np.ndarray, wts: np.ndarray) -> tuple[bool, float, str]:
    """Mean-value coupling check at one state.

    Returns ``(violated, log_gap, regime)``.  ``log_gap > 0`` means the
    margin sits below its target by a factor ``e^log_gap`` of the f2 term
    (ladder regime) or, in the far regime, ``log_gap = -margin / eps^2``.
    """
    bp = dbp.barrier()
    q = dbp.q
    C, de = dbp.C, dbp.delta
    y = np.asarray(x, float) - np.asarray(z, float)
    s = np.asarray(x, float) + np.asarray(z, float)
    r = float(np.linalg.norm(y))
    yh = y / r
    H = eps * pts
    proj = H @ yh
    hperp = H - proj[:, None] * yh
    overlap = np.linalg.norm(H + y, axis=1) < eps
    u = 2.0 * proj / r
    rel = 1.0 + u
    dpow = C * r**de * np.expm1(de * _log_abs1p(u))
    if r > bp.near_radius(eps):
        # even part only: the nodes are symmetric and the first-order terms cancel
        even = C * r**de * _even_power_excess(u, np.zeros_like(u), de) + 4.0 * np.sum(hperp * hperp, 1)
        margin = q * float(wts @ even) + (1.0 - q) * 4.0 * eps * eps
        return margin >= 0.0, -margin / (eps * eps), "far"
    d1 = dpow + 4.0 * (hperp @ s) + 4.0 * np.sum(hperp * hperp, 1)
    xh = np.asarray(x, float) + H
    d1 = np.where(overlap, 4.0 * np.sum(xh * xh, 1) - (C * r**de + s @ s), d1)
    dF1 = float(wts @ d1)
    i = int(annulus_index_of(r, eps, bp.N, DIAGONAL_FRACTION))
    ip = annulus_index_of(r * np.abs(rel), eps, bp.N, DIAGONAL_FRACTION)
    ip = np.where(overlap, 0, ip)
    keep = ip >= 0
    expo = 2.0 * (i - ip[keep]) * bp.log_C + np.log(wts[keep])
    logR = float(logsumexp(expo)) if expo.size else -math.inf
    log_f2 = float(log_f2_index(i, bp, eps))
    target = dbp.target_coefficient * eps**de
    a = q * dF1 + (1.0 - q) * 4.0 * eps * eps - target  # violation iff a >= q (R - 1) f2
    if logR > 0:
        lb = math.log(q) + log_f2 + _log_pos_diff(logR, 0.0)
        if a <= 0:
            return False, math.inf, "near"
        gap = lb - math.log(a)
        return gap <= 0, gap, "near"
    # R <= 1: the f2 term does not help
    lb = math.log(q) + log_f2 + (_log_pos_diff(0.0, logR) if logR < 0 else -math.inf)
    if a >= 0:
        return True, -math.inf, "near"
    gap = math.log(-a) - lb
    return gap <= 0, gap, "near"


def check_dominative_inequality(
    samples, dbp: DominativeBarrierParams, eps: float, quadrature: int = 16, threads: int = 1,
) -> CheckReport:
    """Mean-value coupling with mirror map, against ``(-q C_tilde + 4(1 - q)) eps^delta``.

    In the ladder regime the comparison is done on logarithms.  Where
    ``|y| > N eps/10`` the restated bound is of order ``eps^2`` rather than
    ``eps^delta``, so the check there only requires a negative margin.
    """
    xs, zs = (np.atleast_2d(np.asarray(a, float)) for a in samples)
    if xs.shape[1] != dbp.n:
        raise InvalidInput(f"samples have n={xs.shape[1]}, params have n={dbp.n}")
    pts, wts = ball_quadrature(dbp.n, quadrature)
    r = np.linalg.norm(xs - zs, axis=1)
    diag = r <= DIAGONAL_FRACTION * eps / 10.0
    live = np.flatnonzero(~diag)

    def work(lo, hi):
        return [dominative_sample(xs[k], zs[k], dbp, eps, pts, wts) for k in live[lo:hi]]

    res = [t for part in _chunked(work, live.size, threads) for t in part]
    viol = sum(1 for v, _, _ in res if v)
    gaps = np.array([g for _, g, _ in res])
    regimes = [reg for _, _, reg in res]
    return CheckReport(
        check="dominative",
        samples=int(xs.shape[0]),
        violations=int(viol),
        worst_margin=float(gaps.min()) if gaps.size else math.inf,
        target=dbp.target_coefficient,
        regime_counts={"diagonal": int(diag.sum()), "near": regimes.count("near"), "far": regimes.count("far")},
        params={"delta": dbp.delta, "omega": dbp.omega, "n": dbp.n, "p": dbp.p, "q": dbp.q, "C": dbp.C,
                "N": dbp.N, "C_tilde": dbp.C_tilde, "eps": eps, "quadrature": int(quadrature)},
        details={"C_tilde_branches": list(dbp.C_tilde_branches), "target_coefficient": dbp.target_coefficient,
                 "worst_is_min_log_gap": True},
        margins=gaps,
    )


def sample_dominative_states(n: int, count: int, seed: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """States in ``B_1 x B_1``: half uniform pairs, half within a few eps."""
    rng = np.random.default_rng([int(seed), 5])
    half = count // 2
    x1 = _uniform_ball(rng, half, n)
    z1 = _uniform_ball(rng, half, n)
    m = count - half
    r = rng.random(m) * 3.0 * eps
    x2 = _uniform_ball(rng, m, n) * np.maximum(0.0, 1.0 - r)[:, None]
    z2 = x2 - r[:, None] * random_unit(rng, (m, n))
    return np.vstack([x1, x2]), np.vstack([z1, z2])
