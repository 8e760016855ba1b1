import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from emhd import _jit, dual, kernels
from emhd.dual import DUAL_MATH, Dual2, seed
from emhd.tape import TRACE_MATH, trace


def expr(x, m):
    a, b, c = x
    return (a * b - 3.0) ** 2 / (1.5 + c * c) + m.sin(a) * m.exp(0.3 * b) + m.sqrt(2.0 + m.cos(c)) - m.log(4.0 + a * a) + 1.0 / (2.0 - b) + a**3


def fd_grad_hess(f, x, h=1e-5):
    n = len(x)
    g = np.zeros(n)
    H = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
        for j in range(n):
            e2 = np.zeros(n)
            e2[j] = h
            H[i, j] = (f(x + e + e2) - f(x + e - e2) - f(x - e + e2) + f(x - e - e2)) / (4 * h * h)
    return g, H


def test_dual_matches_finite_differences(rng):
    f = lambda x: expr(list(x), math)
    for _ in range(20):
        x = rng.uniform(-1, 1, 3)
        out = expr(seed(list(x)), DUAL_MATH)
        g, H = fd_grad_hess(f, x)
        assert out.value == pytest.approx(f(x), abs=1e-14)
        np.testing.assert_allclose(out.grad, g, rtol=1e-7, atol=1e-7)
        np.testing.assert_allclose(out.hess, H, rtol=1e-4, atol=1e-4)


def test_dual_hessian_symmetric_after_chain(rng):
    x = seed(list(rng.uniform(-1, 1, 3)))
    out = expr(x, DUAL_MATH)
    for _ in range(5):
        out = dual.sin(out) * out + dual.exp(0.1 * out)
    assert np.abs(out.hess - out.hess.T).max() < 1e-12


def test_dual_real_value_part_exact(rng):
    x = list(rng.uniform(-1, 1, 3))
    assert expr(seed(x), DUAL_MATH).value == expr(x, math)


def test_dual_product_and_quotient_rules():
    a, b = seed([2.0, 5.0])
    p = a * b
    np.testing.assert_array_equal(p.grad, [5.0, 2.0])
    np.testing.assert_array_equal(p.hess, [[0, 1], [1, 0]])
    q = a / b
    np.testing.assert_allclose(q.grad, [1 / 5, -2 / 25])
    np.testing.assert_allclose(q.hess, [[0, -1 / 25], [-1 / 25, 4 / 125]])


def test_dual_negative_base_integer_power():
    (a,) = seed([-2.0])
    c = a**3
    assert c.value == -8.0
    assert c.grad[0] == 12.0
    assert c.hess[0, 0] == -12.0


def test_compose_matches_direct_chain(rng):
    x = seed(list(rng.uniform(-1, 1, 2)))
    u, v = x[0] * x[1], dual.sin(x[0])
    direct = u * u * v
    val = u.value**2 * v.value
    g = [2 * u.value * v.value, u.value**2]
    H = [[2 * v.value, 2 * u.value], [2 * u.value, 0.0]]
    comp = Dual2.compose(val, g, H, [u, v])
    np.testing.assert_allclose(comp.grad, direct.grad, atol=1e-14)
    np.testing.assert_allclose(comp.hess, direct.hess, atol=1e-14)


def test_tape_matches_dual(rng):
    tape = trace(lambda xs, m: expr(xs, m), 3)
    for _ in range(20):
        x = rng.uniform(-1, 1, 3)
        val, grad, hess = kernels.evaluate(tape, x)
        ref = expr(seed(list(x)), DUAL_MATH)
        assert val == pytest.approx(ref.value, rel=1e-14, abs=1e-14)
        np.testing.assert_allclose(grad, ref.grad, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(hess, ref.hess, rtol=1e-12, atol=1e-12)


def test_tape_python_kernel_matches_compiled(rng):
    tape = trace(lambda xs, m: expr(xs, m), 3)
    x = rng.uniform(-1, 1, 3)
    a = kernels.evaluate(tape, x)
    b = kernels.evaluate(tape, x, kernel=kernels.tape_eval_py)
    assert a[0] == b[0]
    np.testing.assert_allclose(a[1], b[1], rtol=1e-15, atol=0)
    np.testing.assert_allclose(a[2], b[2], rtol=1e-15, atol=1e-300)


def test_tape_constant_expression():
    tape = trace(lambda xs, m: 2.5, 2)
    val, grad, hess = kernels.evaluate(tape, np.zeros(2))
    assert val == 2.5 and not grad.any() and not hess.any()


PARITY = r"""
import json
import numpy as np
from emhd import _jit
from emhd.dynamics import Resistances
from emhd.energy import build_saturated_pmsm, reference_saturated_params
from emhd.sim import ConstantDq, ConstantTorque, Scenario, simulate
H = build_saturated_pmsm(reference_saturated_params())
x0 = np.zeros(8); x0[0] = 0.155
sc = Scenario(H, x0, 2e-3, 1e-5, scheme="star+no_rotor", source=ConstantDq((0.0, 60.0)),
              load=ConstantTorque(1.0), resistances=Resistances(2.1))
tr = simulate(sc)
_, g, h = H.derivatives(np.array([0.2, 0.05, 0.01, 0, 0, 0, 0.4]))
print(json.dumps({"numba": _jit.NUMBA_ENABLED, "x": tr.x[-1].tolist(), "g": g.tolist(), "h": h.ravel().tolist()}))
"""


def _run_backend(disable):
    env = dict(os.environ)
    env.pop("EMHD_DISABLE_NUMBA", None)
    if disable:
        env["EMHD_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", PARITY], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_numba_and_numpy_paths_agree():
    fast, slow = _run_backend(False), _run_backend(True)
    assert slow["numba"] is False
    assert fast["numba"] is _jit.HAVE_NUMBA
    np.testing.assert_allclose(fast["x"], slow["x"], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(fast["g"], slow["g"], rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(fast["h"], slow["h"], rtol=1e-13, atol=1e-13)
