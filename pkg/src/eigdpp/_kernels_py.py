"""Pure numpy fallback for the compiled node kernels.

``apply_at_nodes`` is vectorized over nodes.  ``gauss_seidel_sweep`` is
inherently sequential and runs one node at a time, so it is slow; prefer the
Jacobi sweep when the extension is unavailable.
"""
from __future__ import annotations

import numpy as np

NAME = "python"


def _directions(u, nodes, prog) -> np.ndarray:
    K = prog.dir_ptr.size - 1
    D = np.zeros((K, nodes.size))
    for k in range(K):
        acc = np.zeros(nodes.size)
        for s in range(prog.dir_ptr[k], prog.dir_ptr[k + 1]):
            acc = acc + prog.dir_w[s] * u[nodes + prog.dir_off[s]]
        D[k] = acc
    return D


def _reduce(u, nodes, prog, D) -> np.ndarray:
    out = np.zeros(nodes.size)
    if prog.ball_weight > 0.0:
        ball = np.zeros(nodes.size)
        for s in range(prog.ball_off.size):
            ball = ball + prog.ball_w[s] * u[nodes + prog.ball_off[s]]
        out = out + prog.ball_weight * ball
    for t in range(prog.term_w.size):
        lo = np.full(nodes.size, np.inf)
        for a in range(prog.term_ptr[t], prog.term_ptr[t + 1]):
            hi = D[prog.sub_idx[prog.sub_ptr[a]:prog.sub_ptr[a + 1]]].max(axis=0)
            lo = np.minimum(lo, hi)
        out = out + prog.term_w[t] * lo
    return out


def apply_at_nodes(u, nodes, prog, out) -> None:
    nodes = np.asarray(nodes, np.intp)
    out[:] = _reduce(u, nodes, prog, _directions(u, nodes, prog))


def gauss_seidel_sweep(u, nodes, prog) -> float:
    change = 0.0
    one = np.empty(1, np.intp)
    for node in nodes:
        one[0] = node
        new = float(_reduce(u, one, prog, _directions(u, one, prog))[0])
        change = max(change, abs(new - u[node]))
        u[node] = new
    return change
