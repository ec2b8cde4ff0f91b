"""``eigdpp`` command line.

Each command reads a flat JSON config.  Values are resolved as built-in
defaults, then the config file, then the ``--seed``/``--threads``/``--out``
flags.  Exit status: 0 success, 2 validation error (the message names the
offending key), 3 a check reported violations, 1 a numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import coupling, game, holder, io, solver
from .dpp_operator import VARIANTS, DominativeConfig, DppConfig
from .eig_core import AlphaWeights, eigenvalues_symmetric, lambda_j_minmax, weighted_eig_sum
from .errors import EigDppError, InvalidInput
from .frames import FrameFamily
from .grid import BoundaryPayoff, GridFunction, Lattice

COMMANDS = ("solve", "simulate", "check-coupling", "check-dominative", "holder", "eig")
U64 = 2**64


class ConfigError(Exception):
    def __init__(self, key: str, msg: str):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


class ChecksFailed(Exception):
    pass


# -- schema -------------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | bool | list | matrix | any
    default: Any = None
    check: Callable[[Any], str | None] | None = None
    choices: tuple | None = None


def _pos(x):
    return None if x > 0 else "must be > 0"


def _ge1(x):
    return None if x >= 1 else "must be >= 1"


def _delta_half(x):
    return None if 0 < x < 0.5 else f"delta must lie in (0, 1/2), got {x!r}"


def _seed(x):
    return None if 0 <= x < U64 else "must be an unsigned 64-bit integer"


COMMON = {
    "command": Key("str", None, choices=COMMANDS),
    "seed": Key("int", 0, _seed),
    "threads": Key("int", 1, _ge1),
    "out": Key("str", "."),
}

FIELD = {
    "n": Key("int", 2, _ge1),
    "variant": Key("str", "general", choices=VARIANTS),
    "alphas": Key("list", None),
    "p": Key("float", 2.0, lambda x: None if x >= 2 else "must be >= 2"),
    "ball_quadrature_points": Key("int", 8, _ge1),
    "eps": Key("float", 0.1, _pos),
    "h": Key("float", None, _pos),
    "lo": Key("float", -1.0),
    "hi": Key("float", 1.0),
    "payoff": Key("str", None),
    "frames": Key("str", "canonical", choices=("canonical", "random", "rotations")),
    "frame_count": Key("int", 1, _ge1),
    "frame_angles": Key("list", None),
    "dirs_per_subspace": Key("int", 1, _ge1),
    "tol": Key("float", None, _pos),
    "max_iter": Key("int", None, _ge1),
    "sweep": Key("str", "gauss_seidel", choices=solver.SWEEPS),
    "backend": Key("str", None, choices=("cython", "python")),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "solve": dict(FIELD),
    "simulate": {
        **FIELD,
        "variant": Key("str", "general", choices=("general", "extremal")),
        "x0": Key("list", None),
        "trials": Key("int", 1000, _ge1),
        "policy_1": Key("str", "random", choices=("random", "greedy")),
        "policy_2": Key("str", "random", choices=("random", "greedy")),
        "record": Key("int", 10, lambda x: None if x >= 0 else "must be >= 0"),
        "step_cap": Key("int", game.DEFAULT_STEP_CAP, _ge1),
    },
    "check-coupling": {
        "n": Key("int", 2, lambda x: None if x >= 2 else "coupling checks need n >= 2"),
        "delta": Key("float", 0.3, _delta_half),
        "C_tilde": Key("float", None, _pos),
        "alphas": Key("list", None),
        "eps": Key("float", 1e-6, _pos),
        "samples": Key("int", 1000, _ge1),
        "regime": Key("str", "far", choices=("far", "near", "mixed")),
        "i_lo": Key("int", 1, _ge1),
        "i_hi": Key("int", None, _ge1),
        "direction_budget": Key("int", 1000, _ge1),
    },
    "check-dominative": {
        "n": Key("int", 2, _ge1),
        "delta": Key("float", 0.05, lambda x: None if 0 < x < 0.1 else f"delta must lie in (0, 1/10), got {x!r}"),
        "omega": Key("float", None, _pos),
        "p": Key("float", 2.0, lambda x: None if x >= 2 else "must be >= 2"),
        "eps": Key("float", 1e-2, _pos),
        "samples": Key("int", 1000, _ge1),
        "quadrature": Key("int", 16, _ge1),
    },
    "holder": {
        **FIELD,
        "field": Key("str", None),
        "center": Key("list", None),
        "r": Key("float", 0.5, _pos),
        "delta": Key("float", 0.3, _delta_half),
        "bins": Key("int", holder.DEFAULT_BINS, _ge1),
        "exhaustive_limit": Key("int", None, _ge1),
    },
    "eig": {
        "matrix": Key("matrix", None),
        "alphas": Key("list", None),
        "frames": Key("str", "canonical", choices=("canonical", "random")),
        "frame_count": Key("int", 1, _ge1),
        "dirs_per_subspace": Key("int", 1, _ge1),
    },
}


def _coerce(key: str, spec: Key, value):
    if value is None:
        return None
    k = spec.kind
    bad = ConfigError(key, f"expected {k}, got {type(value).__name__}")
    if k == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad
    elif k == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
    elif k == "str":
        if not isinstance(value, str):
            raise bad
    elif k == "bool":
        if not isinstance(value, bool):
            raise bad
    elif k == "list":
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(key, "expected a list of numbers")
    elif k == "matrix":
        if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
            raise ConfigError(key, "expected a list of rows")
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(key, f"must be one of {list(spec.choices)}, got {value!r}")
    if spec.check is not None:
        msg = spec.check(value)
        if msg:
            raise ConfigError(key, msg)
    return value


def resolve(command: str, file_cfg: dict, overrides: dict) -> dict:
    """Merge defaults, file values and flag overrides; validate every key."""
    schema = {**COMMON, **SCHEMAS[command]}
    for key in file_cfg:
        if key not in schema:
            raise ConfigError(key, f"unknown key for command {command!r}")
    if file_cfg.get("command") not in (None, command):
        raise ConfigError("command", f"config is for {file_cfg['command']!r}, not {command!r}")
    cfg = {}
    for key, spec in schema.items():
        if key in overrides and overrides[key] is not None:
            raw = overrides[key]
        else:
            raw = file_cfg.get(key, spec.default)
        cfg[key] = _coerce(key, spec, raw)
    cfg["command"] = command
    return cfg


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("--config", f"file {str(path)!r} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("--config", "top level must be a JSON object")
    return data


# -- builders -------------------------------------------------------------------

def _guard(key: str, fn):
    """Run ``fn``; re-raise input errors as a ConfigError on ``key``."""
    try:
        return fn()
    except (InvalidInput, ValueError) as e:
        raise ConfigError(key, str(e)) from None


def _weights(cfg) -> AlphaWeights:
    n = cfg["n"]
    if cfg.get("variant") == "extremal":
        return AlphaWeights.extremal(n)
    if cfg.get("variant") == "dominative":
        return AlphaWeights.dominative(n, cfg["p"])
    if cfg["alphas"] is None:
        return AlphaWeights.uniform(n)
    if len(cfg["alphas"]) != n:
        raise ConfigError("alphas", f"expected {n} values, got {len(cfg['alphas'])}")
    return _guard("alphas", lambda: AlphaWeights(cfg["alphas"]))


def _frames(cfg) -> FrameFamily:
    n, d = cfg["n"], cfg["dirs_per_subspace"]
    if cfg["frames"] == "canonical":
        return FrameFamily.canonical(n, d)
    if cfg["frames"] == "random":
        return FrameFamily.random(n, cfg["frame_count"], cfg["seed"], d)
    if n != 2:
        raise ConfigError("frames", "rotations need n = 2")
    if cfg["frame_angles"] is None:
        raise ConfigError("frame_angles", "required when frames = 'rotations'")
    return FrameFamily.rotations_2d(cfg["frame_angles"], d)


def _payoff(cfg) -> BoundaryPayoff:
    if cfg["payoff"] is None:
        raise ConfigError("payoff", "required")
    return _guard("payoff", lambda: BoundaryPayoff.from_expression(cfg["payoff"], cfg["n"]))


def _lattice(cfg) -> Lattice:
    h = cfg["h"] if cfg["h"] is not None else cfg["eps"] / 4.0
    if h > cfg["eps"]:
        raise ConfigError("h", f"must not exceed eps = {cfg['eps']!r}")
    return _guard("h", lambda: Lattice(cfg["n"], cfg["lo"], cfg["hi"], h, cfg["eps"]))


def _solve_field(cfg):
    weights = _weights(cfg)
    frames = _frames(cfg)
    dpp = _guard("eps", lambda: DppConfig(cfg["eps"], weights, frames))
    dom = None
    if cfg["variant"] == "dominative":
        dom = _guard("p", lambda: DominativeConfig(cfg["p"], cfg["n"], cfg["ball_quadrature_points"]))
    G = _payoff(cfg)
    lat = _lattice(cfg)
    u, rep = solver.solve(
        cfg["variant"], dpp, G, lat, dominative=dom, tol=cfg["tol"], max_iter=cfg["max_iter"],
        sweep=cfg["sweep"], backend=cfg["backend"],
    )
    return u, rep, G, frames, weights


def _echo(cfg) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in ("out", "threads")}


# -- commands -------------------------------------------------------------------

def cmd_solve(cfg, out: Path) -> int:
    u, rep, *_ = _solve_field(cfg)
    solver.write_field_csv(out / "field.csv", u)
    solver.write_report_json(out / "report.json", rep, {"config": _echo(cfg)})
    return 0


def cmd_simulate(cfg, out: Path) -> int:
    n = cfg["n"]
    x0 = np.zeros(n) if cfg["x0"] is None else np.asarray(cfg["x0"], float)
    if x0.size != n:
        raise ConfigError("x0", f"expected {n} coordinates")
    if not np.all((x0 > cfg["lo"]) & (x0 < cfg["hi"])):
        raise ConfigError("x0", "must lie inside the open box")
    G = _payoff(cfg)
    frames = _frames(cfg)
    weights = _weights(cfg)
    u = None
    solve_rep = None
    if "greedy" in (cfg["policy_1"], cfg["policy_2"]):
        u, solve_rep, *_ = _solve_field(cfg)
    if cfg["variant"] == "extremal":
        roles = ("coin_winner", "coin_winner")
    else:
        roles = ("subspace_picker", "vector_picker")
    s1 = game.Strategy(roles[0], cfg["policy_1"], field=u if cfg["policy_1"] == "greedy" else None)
    s2 = game.Strategy(roles[1], cfg["policy_2"], field=u if cfg["policy_2"] == "greedy" else None)
    box = (cfg["lo"], cfg["hi"])
    payoff, steps = game.simulate_payoffs(
        x0, G, cfg["eps"], frames, s1, s2, cfg["trials"], cfg["seed"], variant=cfg["variant"],
        weights=weights, box=box, threads=cfg["threads"], step_cap=cfg["step_cap"],
    )
    records = []
    for t in range(min(cfg["record"], cfg["trials"])):
        if cfg["variant"] == "extremal":
            rec = game.play_extremal(x0, G, cfg["eps"], s1, s2, cfg["seed"], frames, box=box, step_cap=cfg["step_cap"], traj=t)
        else:
            rec = game.play_general(x0, G, weights, cfg["eps"], frames, s1, s2, cfg["seed"], box=box, step_cap=cfg["step_cap"], traj=t)
        records.append(rec)
    game.write_trajectories_csv(out / "trajectories.csv", records, n)
    trials = cfg["trials"]
    se = float(np.std(payoff, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    report = {
        "estimate": game.Estimate(float(np.mean(payoff)), se, trials, cfg["seed"]).to_dict(),
        "steps_mean": float(np.mean(steps)),
        "steps_max": int(np.max(steps)),
        "config": _echo(cfg),
    }
    if u is not None:
        report["field_value_at_x0"] = float(u.interpolate(x0))
        report["solve"] = solve_rep.to_dict()
    io.write_json(out / "report.json", report)
    return 0


def cmd_check_coupling(cfg, out: Path) -> int:
    n = cfg["n"]
    weights = None
    if cfg["alphas"] is not None:
        if len(cfg["alphas"]) != n:
            raise ConfigError("alphas", f"expected {n} values, got {len(cfg['alphas'])}")
        weights = _guard("alphas", lambda: AlphaWeights(cfg["alphas"]))
    C_tilde = cfg["C_tilde"]
    if C_tilde is None:
        C_tilde = 4.0 if weights is None or weights.beta == 0 else coupling.feasibility_bound(weights) + 1.0
    bp = _guard("delta", lambda: coupling.choose_constants(cfg["delta"], C_tilde))
    eps, count, seed = cfg["eps"], cfg["samples"], cfg["seed"]
    near_r = bp.near_radius(eps)
    if cfg["regime"] in ("far", "mixed") and near_r >= 2.0:
        raise ConfigError("eps", f"far regime |x - z| > N eps/10 = {near_r} is empty; lower eps")
    i_hi = bp.N if cfg["i_hi"] is None else min(cfg["i_hi"], bp.N)
    if cfg["i_lo"] > i_hi:
        raise ConfigError("i_lo", f"must not exceed i_hi = {i_hi}")
    parts = []
    if cfg["regime"] in ("far", "mixed"):
        k = count if cfg["regime"] == "far" else count - count // 2
        parts.append(coupling.sample_far(n, k, seed, near_r))
    if cfg["regime"] in ("near", "mixed"):
        k = count if cfg["regime"] == "near" else count // 2
        x, z, _ = _guard("i_hi", lambda: coupling.sample_near(n, k, seed, eps, cfg["i_lo"], i_hi))
        parts.append((x, z))
    xs = np.vstack([p[0] for p in parts])
    zs = np.vstack([p[1] for p in parts])
    kw = dict(direction_budget=cfg["direction_budget"], seed=seed, threads=cfg["threads"])
    if weights is not None and weights.beta > 0:
        rep = coupling.check_general_inequality((xs, zs), bp, weights, eps, **kw)
    else:
        rep = coupling.check_extremal_inequality((xs, zs), bp, eps, **kw)
    d = rep.to_dict()
    d["config"] = _echo(cfg)
    io.write_json(out / "check.json", d)
    return 0 if rep.ok else 3


def cmd_check_dominative(cfg, out: Path) -> int:
    n = cfg["n"]
    omega = 4.0 ** (-n) if cfg["omega"] is None else cfg["omega"]
    dbp = _guard("omega", lambda: coupling.DominativeBarrierParams(cfg["delta"], omega, n, cfg["p"]))
    xs, zs = coupling.sample_dominative_states(n, cfg["samples"], cfg["seed"], cfg["eps"])
    rep = coupling.check_dominative_inequality((xs, zs), dbp, cfg["eps"], cfg["quadrature"], threads=cfg["threads"])
    d = rep.to_dict()
    d["config"] = _echo(cfg)
    d["details"]["branches_positive"] = bool(min(dbp.C_tilde_branches) > 0)
    d["details"]["target_negative"] = bool(dbp.target_coefficient < 0)
    io.write_json(out / "check.json", d)
    bad = rep.violations > 0 or not (min(dbp.C_tilde_branches) > 0 and dbp.target_coefficient < 0)
    return 3 if bad else 0


def _load_field(cfg) -> GridFunction:
    lat = _lattice(cfg)
    path = Path(cfg["field"])
    if not path.exists():
        raise ConfigError("field", f"file {str(path)!r} not found")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (lat.size, lat.n + 1):
        raise ConfigError("field", f"expected {lat.size} rows of {lat.n + 1} columns, got {data.shape}")
    if np.max(np.abs(data[:, :-1] - lat.coords())) > 1e-9 * max(1.0, abs(lat.lo), abs(lat.hi)):
        raise ConfigError("field", "node coordinates do not match the configured lattice")
    return GridFunction(lat, data[:, -1])


def cmd_holder(cfg, out: Path) -> int:
    n = cfg["n"]
    u = _load_field(cfg) if cfg["field"] is not None else _solve_field(cfg)[0]
    center = np.zeros(n) if cfg["center"] is None else np.asarray(cfg["center"], float)
    if center.size != n:
        raise ConfigError("center", f"expected {n} coordinates")
    rep = _guard("r", lambda: holder.holder_ratio(
        u, center, cfg["r"], cfg["delta"], cfg["eps"], bins=cfg["bins"],
        exhaustive_limit=cfg["exhaustive_limit"], seed=cfg["seed"],
    ))
    rows = holder.modulus_profile(u, center, cfg["r"], cfg["bins"], exhaustive_limit=cfg["exhaustive_limit"], seed=cfg["seed"])
    holder.write_profile_csv(out / "holder.csv", rows)
    d = rep.to_dict()
    d["config"] = _echo(cfg)
    io.write_json(out / "report.json", d)
    return 0


def cmd_eig(cfg, out: Path) -> int:
    if cfg["matrix"] is None:
        raise ConfigError("matrix", "required")
    m = _guard("matrix", lambda: np.array(cfg["matrix"], dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError("matrix", f"must be square, got shape {m.shape}")
    spec = _guard("matrix", lambda: eigenvalues_symmetric(m))
    n = m.shape[0]
    d = cfg["dirs_per_subspace"]
    fam = FrameFamily.canonical(n, d) if cfg["frames"] == "canonical" else FrameFamily.random(n, cfg["frame_count"], cfg["seed"], d)
    report = {
        "eigenvalues": spec.values.tolist(),
        "eigenvectors": spec.vectors.tolist(),
        "lambda_minmax": [lambda_j_minmax(m, j, fam) for j in range(1, n + 1)],
        "config": _echo(cfg),
    }
    if cfg["alphas"] is not None:
        if len(cfg["alphas"]) != n:
            raise ConfigError("alphas", f"expected {n} values, got {len(cfg['alphas'])}")
        report["weighted_sum"] = weighted_eig_sum(m, _guard("alphas", lambda: AlphaWeights(cfg["alphas"])))
    io.write_json(out / "report.json", report)
    return 0


HANDLERS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "check-coupling": cmd_check_coupling,
    "check-dominative": cmd_check_dominative,
    "holder": cmd_holder,
    "eig": cmd_eig,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eigdpp", description="DPP solver, game simulator and coupling checks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--seed", type=int, help="u64 seed; overrides the config")
    p.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    p.add_argument("--out", help="output directory; overrides the config")
    return p


def run(command: str, config_path=None, overrides: dict | None = None) -> int:
    """Run one command; returns the exit status."""
    try:
        cfg = resolve(command, load_config(config_path), overrides or {})
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[command](cfg, out)
    except ConfigError as e:
        print(f"eigdpp: {e}", file=sys.stderr)
        return 2
    except (InvalidInput, ValueError) as e:
        print(f"eigdpp: invalid input: {e}", file=sys.stderr)
        return 2
    except EigDppError as e:
        print(f"eigdpp: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "threads": args.threads, "out": args.out}
    return run(args.command, args.config, overrides)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
