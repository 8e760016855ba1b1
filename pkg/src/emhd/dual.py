"""Second-order forward-mode dual numbers.

A :class:`Dual2` carries a value, its gradient and its Hessian with respect
to a fixed seed basis.  Energies written with ordinary arithmetic and the
functions of :data:`DUAL_MATH` can be evaluated on them directly.
"""

from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np

__all__ = ["Dual2", "DUAL_MATH", "sin", "cos", "exp", "log", "sqrt", "seed"]


class Dual2:
    __slots__ = ("value", "grad", "hess")
    __array_priority__ = 1000

    def __init__(self, value, grad, hess):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, value: float, n: int) -> "Dual2":
        return cls(value, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Dual2":
        g = np.zeros(n)
        g[index] = 1.0
        return cls(value, g, np.zeros((n, n)))

    @property
    def size(self) -> int:
        return self.grad.shape[0]

    def _lift(self, other) -> "Dual2":
        if isinstance(other, Dual2):
            return other
        return Dual2.constant(float(other), self.size)

    # arithmetic

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Dual2(self.value + other, self.grad.copy(), self.hess.copy())

    __radd__ = __add__

    def __neg__(self):
        return Dual2(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        return Dual2(self.value - other, self.grad.copy(), self.hess.copy())

    def __rsub__(self, other):
        return Dual2(other - self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            a, b = self, other
            cross = np.outer(a.grad, b.grad)
            return Dual2(
                a.value * b.value,
                a.value * b.grad + b.value * a.grad,
                a.value * b.hess + b.value * a.hess + cross + cross.T,
            )
        c = float(other)
        return Dual2(self.value * c, self.grad * c, self.hess * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other._reciprocal()
        c = float(other)
        return Dual2(self.value / c, self.grad / c, self.hess / c)

    def __rtruediv__(self, other):
        return self._reciprocal() * float(other)

    def _reciprocal(self):
        v = self.value
        return self._unary(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __pow__(self, exponent):
        if isinstance(exponent, Dual2):
            return exp(exponent * log(self))
        p = float(exponent)
        if p == 0.0:
            return Dual2.constant(1.0, self.size)
        if p == int(p) and p > 0:
            # repeated products keep negative bases exact
            result = self
            for _ in range(int(p) - 1):
                result = result * self
            return result
        v = self.value
        return self._unary(v**p, p * v ** (p - 1.0), p * (p - 1.0) * v ** (p - 2.0))

    def _unary(self, f0: float, f1: float, f2: float) -> "Dual2":
        g = self.grad
        return Dual2(f0, f1 * g, f1 * self.hess + f2 * np.outer(g, g))

    # comparisons act on the value part only
    def __lt__(self, other):
        return self.value < (other.value if isinstance(other, Dual2) else other)

    def __gt__(self, other):
        return self.value > (other.value if isinstance(other, Dual2) else other)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Dual2({self.value!r}, grad={self.grad!r})"

    @staticmethod
    def compose(value: float, grad, hess, inputs) -> "Dual2":
        """Chain an outer function's derivatives onto dual inputs.

        ``grad`` and ``hess`` are derivatives of the outer function with
        respect to its arguments; ``inputs`` are those arguments as duals
        over a common seed basis.
        """
        grad = np.asarray(grad, dtype=float)
        hess = np.asarray(hess, dtype=float)
        gin = np.array([x.grad for x in inputs])  # (k, n)
        out_grad = grad @ gin
        out_hess = gin.T @ hess @ gin
        for gk, x in zip(grad, inputs):
            if gk != 0.0:
                out_hess = out_hess + gk * x.hess
        return Dual2(value, out_grad, out_hess)


def seed(values) -> list[Dual2]:
    """Independent variables over a basis the size of ``values``."""
    n = len(values)
    return [Dual2.variable(v, k, n) for k, v in enumerate(values)]


def _dispatch(x, fn, f1, f2):
    if isinstance(x, Dual2):
        v = x.value
        return x._unary(fn(v), f1(v), f2(v))
    return fn(x)


def sin(x):
    return _dispatch(x, math.sin, math.cos, lambda v: -math.sin(v))


def cos(x):
    return _dispatch(x, math.cos, lambda v: -math.sin(v), lambda v: -math.cos(v))


def exp(x):
    return _dispatch(x, math.exp, math.exp, math.exp)


def log(x):
    return _dispatch(x, math.log, lambda v: 1.0 / v, lambda v: -1.0 / v**2)


def sqrt(x):
    return _dispatch(
        x, math.sqrt, lambda v: 0.5 / math.sqrt(v), lambda v: -0.25 / v**1.5
    )


DUAL_MATH = SimpleNamespace(sin=sin, cos=cos, exp=exp, log=log, sqrt=sqrt)
