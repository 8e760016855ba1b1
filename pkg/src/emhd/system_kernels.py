"""Compiled state-equation and RK4 kernels.

The whole right-hand side (energy tape, constraint elimination, frame
terms, sources, loads, multipliers) and the integration loop live here so a
simulation runs without returning to Python between steps.  All functions
are plain numpy code; ``_jit.maybe_njit`` compiles them unless
``EMHD_DISABLE_NUMBA`` is set.
"""

from __future__ import annotations

import math

import numpy as np

from . import _jit
from .kernels import tape_eval

# frame codes
ABC, AB0, DQ0_S, DQ0_R = 0, 1, 2, 3
# source codes
SRC_CONST_DQ, SRC_SINE, SRC_INJECTION, SRC_DIRECT = 0, 1, 2, 3
# load codes
LOAD_CONST, LOAD_VISCOUS = 0, 1
# cfg layout
CFG_N, CFG_J, CFG_RS, CFG_RR, CFG_FRAME, CFG_STAR, CFG_PRESCRIBED, CFG_LOAD, CFG_LOAD_P, CFG_METHOD = range(10)
CFG_LEN = 10
# output layout
O_IS, O_IR, O_OMEGA, O_TE, O_H, O_U, O_TL, O_MU, O_VN, O_THS = 0, 3, 6, 7, 8, 9, 12, 13, 16, 17
OUT_LEN = 18
# status codes
OK, DEGENERATE, NO_CONVERGENCE, NONFINITE = 0, 1, 2, 3

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50

_S23 = math.sqrt(2.0 / 3.0)
_S3 = math.sqrt(3.0)
_CLARKE = _S23 * np.array(
    [[1.0, -0.5, -0.5], [0.0, _S3 / 2.0, -_S3 / 2.0], [math.sqrt(0.5), math.sqrt(0.5), math.sqrt(0.5)]]
)


def solve_small_py(A, b):
    """Gaussian elimination with partial pivoting; returns (x, ok)."""
    n = b.shape[0]
    M = A.copy()
    y = b.copy()
    scale = 1.0
    for i in range(n):
        for j in range(n):
            if abs(M[i, j]) > scale:
                scale = abs(M[i, j])
    for col in range(n):
        piv = col
        for r in range(col + 1, n):
            if abs(M[r, col]) > abs(M[piv, col]):
                piv = r
        if abs(M[piv, col]) <= 1e-13 * scale:
            return y, False
        if piv != col:
            for j in range(n):
                tmp = M[col, j]
                M[col, j] = M[piv, j]
                M[piv, j] = tmp
            tmp = y[col]
            y[col] = y[piv]
            y[piv] = tmp
        for r in range(col + 1, n):
            f = M[r, col] / M[col, col]
            for j in range(col, n):
                M[r, j] -= f * M[col, j]
            y[r] -= f * y[col]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for j in range(i + 1, n):
            acc -= M[i, j] * x[j]
        x[i] = acc / M[i, i]
    return x, True


solve_small = _jit.maybe_njit(solve_small_py)


def newton_eliminate_py(ops, ia, ib, cs, val, g, h, x7, elim):
    """Solve dH/dx[elim] = 0 for x[elim] in place; returns (status, output node)."""
    ne = elim.shape[0]
    out = 0
    for it in range(NEWTON_MAXIT + 1):
        out = tape_eval(ops, ia, ib, cs, x7, 2, val, g, h)
        r = np.zeros(ne)
        A = np.zeros((ne, ne))
        worst = 0.0
        for i in range(ne):
            r[i] = g[out, elim[i]]
            if not math.isfinite(r[i]):
                return NONFINITE, out
            if abs(r[i]) > worst:
                worst = abs(r[i])
            for j in range(ne):
                A[i, j] = h[out, elim[i], elim[j]]
        if worst < NEWTON_TOL:
            return OK, out
        if it == NEWTON_MAXIT:
            break
        step, ok = solve_small(A, r)
        if not ok:
            return DEGENERATE, out
        tiny = True
        for i in range(ne):
            xi = x7[elim[i]]
            x7[elim[i]] = xi - step[i]
            if abs(step[i]) > 4.0 * 2.220446049250313e-16 * max(1.0, abs(xi)):
                tiny = False
        if tiny:
            # step below roundoff: residual is as small as double precision allows
            out = tape_eval(ops, ia, ib, cs, x7, 2, val, g, h)
            return OK, out
    return NO_CONVERGENCE, out


newton_eliminate = _jit.maybe_njit(newton_eliminate_py)


def frame_terms_py(frame, x, grad, omega, omega_s, n):
    """(Omega_s, Omega_r, Te_extra) for the frame code."""
    if frame == DQ0_S:
        # n phi_r^T J3 i_r
        te = n * (-x[3] * grad[4] + x[4] * grad[3])
        return omega_s, omega_s - omega, te
    if frame == DQ0_R:
        # -n phi_s^T J3 i_s
        te = -n * (-x[0] * grad[1] + x[1] * grad[0])
        return omega, 0.0, te
    return 0.0, 0.0, 0.0


frame_terms_k = _jit.maybe_njit(frame_terms_py)


def carrier_py(code, phase):
    if code == 0:
        frac = phase - math.floor(phase)
        return 1.0 if frac < 0.5 else -1.0
    return math.sin(2.0 * math.pi * phase)


def from_ab0_py(frame, theta, theta_s, v, u):
    if frame == ABC:
        for i in range(3):
            u[i] = _CLARKE[0, i] * v[0] + _CLARKE[1, i] * v[1] + _CLARKE[2, i] * v[2]
        return
    if frame == AB0:
        u[0] = v[0]
        u[1] = v[1]
        u[2] = v[2]
        return
    ang = theta_s if frame == DQ0_S else theta
    c = math.cos(ang)
    s = math.sin(ang)
    u[0] = c * v[0] + s * v[1]
    u[1] = -s * v[0] + c * v[1]
    u[2] = v[2]


carrier = _jit.maybe_njit(carrier_py)
from_ab0 = _jit.maybe_njit(from_ab0_py)


def source_eval_py(src, t, theta, frame, u):
    """Fill ``u`` with the impressed voltage in the simulation frame; returns (theta_s, omega_s)."""
    code = int(src[0])
    v = np.zeros(3)
    if code == SRC_DIRECT:
        u[0] = src[1]
        u[1] = src[2]
        u[2] = src[3]
        return src[4], src[5]
    if code == SRC_CONST_DQ:
        omega_s = src[4]
        theta_s = omega_s * t
        if frame == DQ0_S or frame == DQ0_R:
            u[0] = src[1]
            u[1] = src[2]
            u[2] = src[3]
            return theta_s, omega_s
        c = math.cos(theta)
        s = math.sin(theta)
        v[0] = c * src[1] - s * src[2]
        v[1] = s * src[1] + c * src[2]
        v[2] = src[3]
        from_ab0(frame, theta, 0.0, v, u)
        return theta_s, omega_s
    if code == SRC_SINE:
        amp = src[1]
        omega_s = 2.0 * math.pi * src[2]
        theta_s = omega_s * t + src[3]
        k = math.sqrt(1.5) * amp
        v[0] = k * math.cos(theta_s)
        v[1] = k * math.sin(theta_s)
        from_ab0(frame, theta, theta_s, v, u)
        return theta_s, omega_s
    # injection: alpha-beta low + high * carrier
    w = carrier(int(src[6]), src[5] * t)
    v[0] = src[1] + src[3] * w
    v[1] = src[2] + src[4] * w
    from_ab0(frame, theta, 0.0, v, u)
    return 0.0, 0.0


source_eval = _jit.maybe_njit(source_eval_py)


def system_eval_py(x, t, lam, ops, ia, ib, cs, val, g, h, cfg, used, elim, cons, src, dx, xfull, out):
    """Right-hand side at (x, t); fills dx (8), xfull (8, with eliminated fluxes) and out.

    ``lam`` holds the last eliminated values and is updated (warm start).
    Returns a status code.
    """
    n = cfg[CFG_N]
    J = cfg[CFG_J]
    Rs = cfg[CFG_RS]
    Rr = cfg[CFG_RR]
    frame = int(cfg[CFG_FRAME])
    ne = elim.shape[0]
    nc = cons.shape[0]
    for k in range(8):
        xfull[k] = x[k]
    for k in range(6):
        if used[k] == 0.0:
            xfull[k] = 0.0
    x7 = xfull[0:7].copy()
    if ne > 0:
        for i in range(ne):
            x7[elim[i]] = lam[i]
        status, node = newton_eliminate(ops, ia, ib, cs, val, g, h, x7, elim)
        if status != OK:
            return status
        for i in range(ne):
            lam[i] = x7[elim[i]]
            xfull[elim[i]] = x7[elim[i]]
    else:
        order = 2 if nc > 0 else 1
        node = tape_eval(ops, ia, ib, cs, x7, order, val, g, h)
    grad = g[node]
    rho = xfull[7]
    omega = rho / J
    theta = xfull[6]

    u = np.zeros(3)
    theta_s, omega_s = source_eval(src, t, theta, frame, u)
    om_s, om_r, te_extra = frame_terms_k(frame, xfull, grad, omega, omega_s, n)
    te = -n * grad[6] + te_extra
    if cfg[CFG_PRESCRIBED] != 0.0:
        tl = te
    elif int(cfg[CFG_LOAD]) == LOAD_VISCOUS:
        tl = cfg[CFG_LOAD_P] * omega / n
    else:
        tl = cfg[CFG_LOAD_P]

    f = np.zeros(8)
    f[0] = u[0] - Rs * grad[0] + om_s * xfull[1]
    f[1] = u[1] - Rs * grad[1] - om_s * xfull[0]
    f[2] = u[2] - Rs * grad[2]
    f[3] = -Rr * grad[3] + om_r * xfull[4]
    f[4] = -Rr * grad[4] - om_r * xfull[3]
    f[5] = -Rr * grad[5]
    f[6] = omega
    f[7] = 0.0 if cfg[CFG_PRESCRIBED] != 0.0 else n * (te - tl)
    for k in range(6):
        if used[k] == 0.0:
            f[k] = 0.0

    mu = np.zeros(3)
    if nc > 0:
        hess = h[node]
        rhs = np.zeros(nc)
        A = np.zeros((nc, nc))
        for i in range(nc):
            acc = 0.0
            for k in range(7):
                acc += hess[cons[i], k] * f[k]
            rhs[i] = -acc
            for j in range(nc):
                A[i, j] = hess[cons[i], cons[j]]
        sol, ok = solve_small(A, rhs)
        if not ok:
            return DEGENERATE
        for i in range(nc):
            mu[i] = sol[i]

    for k in range(8):
        dx[k] = f[k]
    if int(cfg[CFG_METHOD]) == 1:
        for i in range(nc):
            dx[cons[i]] += mu[i]
    for i in range(ne):
        dx[elim[i]] = 0.0

    vn = 0.0
    if cfg[CFG_STAR] != 0.0:
        for i in range(nc):
            if cons[i] == 2:
                # potentials impressed, u = v: v_N = (v0 - u0 - mu) / sqrt(3)
                vn = -mu[i] / _S3

    for k in range(3):
        out[O_IS + k] = grad[k]
        out[O_IR + k] = grad[3 + k]
        out[O_U + k] = u[k]
        out[O_MU + k] = mu[k]
    out[O_OMEGA] = omega
    out[O_TE] = te
    out[O_H] = val[node] + rho * rho / (2.0 * J * n * n)
    out[O_TL] = tl
    out[O_VN] = vn
    out[O_THS] = theta_s

    for k in range(8):
        if not math.isfinite(dx[k]):
            return NONFINITE
    return OK


system_eval = _jit.maybe_njit(system_eval_py)


def rk4_integrate_py(x0, t0, dt, nsteps, lam, ops, ia, ib, cs, cfg, used, elim, cons, src, traj_x, traj_out):
    """Classical RK4; logs the full state and outputs at every grid point.

    Returns (status, index of the failing grid point or nsteps).
    """
    nn = ops.shape[0]
    val = np.zeros(nn)
    g = np.zeros((nn, 7))
    h = np.zeros((nn, 7, 7))
    x = x0.copy()
    k1 = np.zeros(8)
    k2 = np.zeros(8)
    k3 = np.zeros(8)
    k4 = np.zeros(8)
    xs = np.zeros(8)
    xfull = np.zeros(8)
    out = np.zeros(OUT_LEN)
    for step in range(nsteps + 1):
        t = t0 + step * dt
        st = system_eval(x, t, lam, ops, ia, ib, cs, val, g, h, cfg, used, elim, cons, src, k1, xfull, out)
        if st != OK:
            return st, step
        traj_x[step, :] = xfull
        traj_out[step, :] = out
        if step == nsteps:
            break
        for k in range(8):
            xs[k] = x[k] + 0.5 * dt * k1[k]
        st = system_eval(xs, t + 0.5 * dt, lam, ops, ia, ib, cs, val, g, h, cfg, used, elim, cons, src, k2, xfull, out)
        if st != OK:
            return st, step
        for k in range(8):
            xs[k] = x[k] + 0.5 * dt * k2[k]
        st = system_eval(xs, t + 0.5 * dt, lam, ops, ia, ib, cs, val, g, h, cfg, used, elim, cons, src, k3, xfull, out)
        if st != OK:
            return st, step
        for k in range(8):
            xs[k] = x[k] + dt * k3[k]
        st = system_eval(xs, t + dt, lam, ops, ia, ib, cs, val, g, h, cfg, used, elim, cons, src, k4, xfull, out)
        if st != OK:
            return st, step
        for k in range(8):
            x[k] = x[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
    return OK, nsteps


rk4_integrate = _jit.maybe_njit(rk4_integrate_py)
