"""Fixed-point iteration ``u = T u`` with the payoff frozen on the collar."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import io
from .dpp_operator import DominativeConfig, DppConfig, GridOperator, build_program
from .errors import Diverged, InvalidInput
from .grid import BoundaryPayoff, GridFunction, Lattice

SWEEPS = ("jacobi", "gauss_seidel")
DIVERGENCE_WINDOW = 100
DIVERGENCE_FACTOR = 10.0


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    tol: float
    max_iter: int
    sweep: str
    variant: str
    backend: str
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        # wall time is left out by default so reports are reproducible byte for byte
        d = asdict(self)
        if not include_timing:
            d.pop("wall_time")
        return d


def default_tol(gvals: np.ndarray) -> float:
    return 1e-8 * (float(np.max(gvals)) - float(np.min(gvals)) + 1.0)


def default_max_iter(eps: float) -> int:
    return int(math.ceil(100.0 / eps**2))


def make_operator(
    variant: str,
    cfg: DppConfig,
    lattice: Lattice,
    dominative: DominativeConfig | None = None,
    backend: str | None = None,
) -> GridOperator:
    return GridOperator(lattice, build_program(variant, cfg, dominative), cfg.eps, backend=backend)


def residual(u: GridFunction, variant: str, cfg: DppConfig, dominative: DominativeConfig | None = None) -> float:
    """Sup over interior nodes of ``|T u - u|``."""
    return make_operator(variant, cfg, u.lattice, dominative).residual(u.values)


def solve(
    variant: str,
    cfg: DppConfig,
    G: BoundaryPayoff,
    lattice: Lattice,
    *,
    dominative: DominativeConfig | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    sweep: str = "gauss_seidel",
    initial: np.ndarray | None = None,
    callback: Callable[[int, float], None] | None = None,
    backend: str | None = None,
) -> tuple[GridFunction, SolveReport]:
    """Iterate the operator to its fixed point.

    Parameters
    ----------
    variant : {"general", "extremal", "split", "dominative"}
    cfg : DppConfig
        Step size, weights and frames.
    G : BoundaryPayoff
        Evaluated on every node; collar values stay frozen.
    tol : float, optional
        Sup-norm residual target, default ``1e-8 * (max G - min G + 1)``.
    max_iter : int, optional
        Default ``ceil(100 / eps^2)``.
    sweep : {"jacobi", "gauss_seidel"}
    initial : array, optional
        Starting interior values; default is the collar minimum of G.

    Returns
    -------
    (GridFunction, SolveReport)
    """
    if sweep not in SWEEPS:
        raise InvalidInput(f"sweep must be one of {SWEEPS}, got {sweep!r}")
    op = make_operator(variant, cfg, lattice, dominative, backend)
    values = G.on_lattice(lattice)
    collar = lattice.collar_nodes()
    gvals = values[collar]
    tol = default_tol(gvals) if tol is None else float(tol)
    if not tol > 0:
        raise InvalidInput("tol must be > 0")
    max_iter = default_max_iter(cfg.eps) if max_iter is None else int(max_iter)
    if max_iter < 1:
        raise InvalidInput("max_iter must be >= 1")
    interior = op.interior
    if initial is None:
        values[interior] = float(np.min(gvals))
    else:
        init = np.asarray(initial, float).reshape(-1)
        values[interior] = init[interior] if init.size == lattice.size else init
    if not np.all(np.isfinite(values)):
        raise InvalidInput("initial values are not finite")

    t0 = time.perf_counter()
    history: list[float] = []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        if sweep == "jacobi":
            new = op.apply(values)
            change = float(np.max(np.abs(new - values[interior]))) if interior.size else 0.0
            values[interior] = new
        else:
            change = op.gauss_seidel_sweep(values)
        if not math.isfinite(change):
            raise Diverged(f"non-finite update at iteration {it}")
        history.append(change)
        if callback is not None:
            callback(it, change)
        if len(history) > DIVERGENCE_WINDOW and change > DIVERGENCE_FACTOR * history[-1 - DIVERGENCE_WINDOW] and change > tol:
            raise Diverged(f"residual grew from {history[-1 - DIVERGENCE_WINDOW]:.3e} to {change:.3e} over {DIVERGENCE_WINDOW} iterations")
        if change <= tol and op.residual(values) <= tol:
            converged = True
            break
    final = op.residual(values)
    report = SolveReport(
        iterations=it,
        final_residual=final,
        converged=converged and final <= tol,
        tol=tol,
        max_iter=max_iter,
        sweep=sweep,
        variant=variant,
        backend=op.kernels.NAME,
        wall_time=time.perf_counter() - t0,
    )
    return GridFunction(lattice, values), report


def field_rows(u: GridFunction):
    coords = u.lattice.coords()
    return np.column_stack([coords, u.values])


def write_field_csv(path, u: GridFunction):
    header = [f"x{k + 1}" for k in range(u.lattice.n)] + ["u"]
    return io.write_csv(path, header, field_rows(u))


def write_report_json(path, report: SolveReport, extra: dict | None = None):
    d = report.to_dict()
    if extra:
        d.update(extra)
    return io.write_json(path, d)
