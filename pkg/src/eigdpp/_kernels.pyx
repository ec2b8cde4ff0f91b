# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled node kernels for the DPP operator.

Mirrors ``eigdpp._kernels_py`` operation for operation, including the
summation order, so both backends return identical values.
"""
import numpy as np

from libc.math cimport fabs, INFINITY

NAME = "cython"


cdef inline double _eval_node(
    const double[::1] u, Py_ssize_t node,
    const Py_ssize_t[::1] dir_ptr, const Py_ssize_t[::1] dir_off, const double[::1] dir_w,
    const Py_ssize_t[::1] sub_ptr, const Py_ssize_t[::1] sub_idx,
    const Py_ssize_t[::1] term_ptr, const double[::1] term_w,
    const Py_ssize_t[::1] ball_off, const double[::1] ball_w, double ball_weight,
    double[::1] D,
) noexcept nogil:
    cdef Py_ssize_t k, s, t, a, b, K = dir_ptr.shape[0] - 1, T = term_w.shape[0]
    cdef double acc, lo, hi, ball, out = 0.0
    for k in range(K):
        acc = 0.0
        for s in range(dir_ptr[k], dir_ptr[k + 1]):
            acc = acc + dir_w[s] * u[node + dir_off[s]]
        D[k] = acc
    if ball_weight > 0.0:
        ball = 0.0
        for s in range(ball_off.shape[0]):
            ball = ball + ball_w[s] * u[node + ball_off[s]]
        out = out + ball_weight * ball
    for t in range(T):
        lo = INFINITY
        for a in range(term_ptr[t], term_ptr[t + 1]):
            hi = -INFINITY
            for b in range(sub_ptr[a], sub_ptr[a + 1]):
                if D[sub_idx[b]] > hi:
                    hi = D[sub_idx[b]]
            if hi < lo:
                lo = hi
        out = out + term_w[t] * lo
    return out


def apply_at_nodes(const double[::1] u, const Py_ssize_t[::1] nodes, prog, double[::1] out):
    """Evaluate the compiled program at ``nodes``; results go to ``out``."""
    cdef const Py_ssize_t[::1] dir_ptr = prog.dir_ptr
    cdef const Py_ssize_t[::1] dir_off = prog.dir_off
    cdef const double[::1] dir_w = prog.dir_w
    cdef const Py_ssize_t[::1] sub_ptr = prog.sub_ptr
    cdef const Py_ssize_t[::1] sub_idx = prog.sub_idx
    cdef const Py_ssize_t[::1] term_ptr = prog.term_ptr
    cdef const double[::1] term_w = prog.term_w
    cdef const Py_ssize_t[::1] ball_off = prog.ball_off
    cdef const double[::1] ball_w = prog.ball_w
    cdef double ball_weight = prog.ball_weight
    cdef double[::1] D = np.empty(max(dir_ptr.shape[0] - 1, 1))
    cdef Py_ssize_t i
    with nogil:
        for i in range(nodes.shape[0]):
            out[i] = _eval_node(u, nodes[i], dir_ptr, dir_off, dir_w, sub_ptr, sub_idx,
                                term_ptr, term_w, ball_off, ball_w, ball_weight, D)


def gauss_seidel_sweep(double[::1] u, const Py_ssize_t[::1] nodes, prog):
    """Update ``u`` in place node by node; returns the largest absolute change."""
    cdef const Py_ssize_t[::1] dir_ptr = prog.dir_ptr
    cdef const Py_ssize_t[::1] dir_off = prog.dir_off
    cdef const double[::1] dir_w = prog.dir_w
    cdef const Py_ssize_t[::1] sub_ptr = prog.sub_ptr
    cdef const Py_ssize_t[::1] sub_idx = prog.sub_idx
    cdef const Py_ssize_t[::1] term_ptr = prog.term_ptr
    cdef const double[::1] term_w = prog.term_w
    cdef const Py_ssize_t[::1] ball_off = prog.ball_off
    cdef const double[::1] ball_w = prog.ball_w
    cdef double ball_weight = prog.ball_weight
    cdef double[::1] D = np.empty(max(dir_ptr.shape[0] - 1, 1))
    cdef Py_ssize_t i, node
    cdef double new, change = 0.0
    with nogil:
        for i in range(nodes.shape[0]):
            node = nodes[i]
            new = _eval_node(u, node, dir_ptr, dir_off, dir_w, sub_ptr, sub_idx,
                             term_ptr, term_w, ball_off, ball_w, ball_weight, D)
            if fabs(new - u[node]) > change:
                change = fabs(new - u[node])
            u[node] = new
    return change
