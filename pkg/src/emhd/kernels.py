"""Second-order forward-mode interpreter for recorded tapes.

``tape_eval`` is written with numpy array expressions so the same source
serves as the pure-numpy fallback and as the numba-compiled kernel.
"""

from __future__ import annotations

import math

import numpy as np

from . import _jit
from .tape import (
    ADD, ADDC, CONST, COS, DIV, EXP, LOG, MUL, MULC, NEG, POWC, RDIVC, RSUBC,
    SIN, SQRT, SUB, VAR, Tape,
)

__all__ = ["tape_eval_py", "tape_eval", "evaluate", "make_workspace"]


def make_workspace(n_nodes: int, n_seeds: int):
    return (
        np.zeros(n_nodes),
        np.zeros((n_nodes, n_seeds)),
        np.zeros((n_nodes, n_seeds, n_seeds)),
    )


def tape_eval_py(ops, ia, ib, cs, x, order, val, g, h):
    """Evaluate a tape at ``x``; fills ``val``, ``g`` (order>=1), ``h`` (order 2).

    Returns the index of the output node.  Derivatives of node k are kept in
    ``g[k]`` and ``h[k]``; seeds are the entries of ``x``.
    """
    n = ops.shape[0]
    for k in range(n):
        op = ops[k]
        a = ia[k]
        b = ib[k]
        c = cs[k]
        if op == CONST:
            val[k] = c
            if order >= 1:
                g[k, :] = 0.0
            if order >= 2:
                h[k, :, :] = 0.0
            continue
        if op == VAR:
            val[k] = x[a]
            if order >= 1:
                g[k, :] = 0.0
                g[k, a] = 1.0
            if order >= 2:
                h[k, :, :] = 0.0
            continue
        if op == ADD:
            val[k] = val[a] + val[b]
            if order >= 1:
                g[k] = g[a] + g[b]
            if order >= 2:
                h[k] = h[a] + h[b]
            continue
        if op == SUB:
            val[k] = val[a] - val[b]
            if order >= 1:
                g[k] = g[a] - g[b]
            if order >= 2:
                h[k] = h[a] - h[b]
            continue
        if op == MUL:
            va = val[a]
            vb = val[b]
            val[k] = va * vb
            if order >= 1:
                g[k] = va * g[b] + vb * g[a]
            if order >= 2:
                cross = np.outer(g[a], g[b])
                h[k] = va * h[b] + vb * h[a] + cross + cross.T
            continue
        if op == DIV:
            vb = val[b]
            q = val[a] / vb
            val[k] = q
            if order >= 1:
                g[k] = (g[a] - q * g[b]) / vb
            if order >= 2:
                cross = np.outer(g[k], g[b])
                h[k] = (h[a] - q * h[b] - cross - cross.T) / vb
            continue
        if op == NEG:
            val[k] = -val[a]
            if order >= 1:
                g[k] = -g[a]
            if order >= 2:
                h[k] = -h[a]
            continue
        if op == ADDC:
            val[k] = val[a] + c
            if order >= 1:
                g[k] = g[a]
            if order >= 2:
                h[k] = h[a]
            continue
        if op == MULC:
            val[k] = val[a] * c
            if order >= 1:
                g[k] = c * g[a]
            if order >= 2:
                h[k] = c * h[a]
            continue
        if op == RSUBC:
            val[k] = c - val[a]
            if order >= 1:
                g[k] = -g[a]
            if order >= 2:
                h[k] = -h[a]
            continue
        # remaining ops are unary f(val[a]) with derivatives f1, f2
        v = val[a]
        if op == RDIVC:
            f0 = c / v
            f1 = -f0 / v
            f2 = -2.0 * f1 / v
        elif op == POWC:
            f0 = v**c
            f1 = c * v ** (c - 1.0)
            f2 = c * (c - 1.0) * v ** (c - 2.0)
        elif op == SIN:
            f0 = math.sin(v)
            f1 = math.cos(v)
            f2 = -f0
        elif op == COS:
            f0 = math.cos(v)
            f1 = -math.sin(v)
            f2 = -f0
        elif op == EXP:
            f0 = math.exp(v)
            f1 = f0
            f2 = f0
        elif op == LOG:
            f0 = math.log(v)
            f1 = 1.0 / v
            f2 = -f1 * f1
        elif op == SQRT:
            f0 = math.sqrt(v)
            f1 = 0.5 / f0
            f2 = -0.5 * f1 / v
        else:
            f0 = math.nan
            f1 = math.nan
            f2 = math.nan
        val[k] = f0
        if order >= 1:
            g[k] = f1 * g[a]
        if order >= 2:
            h[k] = f1 * h[a] + f2 * np.outer(g[a], g[a])
    return n - 1


tape_eval = _jit.maybe_njit(tape_eval_py)


def evaluate(tape: Tape, x, order: int = 2, kernel=None):
    """Value, gradient and Hessian of ``tape`` at ``x`` (Hessian is None below order 2)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    ns = tape.n_seeds
    val, g, h = make_workspace(len(tape), ns)
    fn = tape_eval if kernel is None else kernel
    out = fn(tape.ops, tape.arg_a, tape.arg_b, tape.consts, x, order, val, g, h)
    grad = g[out].copy() if order >= 1 else None
    hess = h[out].copy() if order >= 2 else None
    return float(val[out]), grad, hess
