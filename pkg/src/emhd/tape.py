"""Record an energy expression once as a flat instruction tape.

Energies are plain Python functions of scalars.  Running one on
:class:`Node` objects records every arithmetic step; the resulting
:class:`Tape` is replayed by the compiled kernels in :mod:`emhd.kernels`
at every evaluation, so the Python function body runs only once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

__all__ = ["Tape", "Node", "Recorder", "TRACE_MATH", "trace", "OPCODES"]

# opcode table shared with kernels.py
CONST, VAR, ADD, SUB, MUL, DIV, NEG = 0, 1, 2, 3, 4, 5, 6
ADDC, MULC, RSUBC, RDIVC, POWC = 7, 8, 9, 10, 11
SIN, COS, EXP, LOG, SQRT = 12, 13, 14, 15, 16

OPCODES = {
    "CONST": CONST, "VAR": VAR, "ADD": ADD, "SUB": SUB, "MUL": MUL, "DIV": DIV,
    "NEG": NEG, "ADDC": ADDC, "MULC": MULC, "RSUBC": RSUBC, "RDIVC": RDIVC,
    "POWC": POWC, "SIN": SIN, "COS": COS, "EXP": EXP, "LOG": LOG, "SQRT": SQRT,
}


@dataclass(frozen=True)
class Tape:
    ops: np.ndarray  # int64 opcodes
    arg_a: np.ndarray  # first operand node (or seed index for VAR)
    arg_b: np.ndarray  # second operand node
    consts: np.ndarray  # float64 constant per instruction
    n_seeds: int

    def __len__(self) -> int:
        return int(self.ops.shape[0])

    @property
    def output(self) -> int:
        return len(self) - 1


class Recorder:
    def __init__(self):
        self.ops: list[int] = []
        self.a: list[int] = []
        self.b: list[int] = []
        self.c: list[float] = []
        self._consts: dict[float, Node] = {}

    def emit(self, op: int, a: int = 0, b: int = 0, c: float = 0.0) -> "Node":
        self.ops.append(op)
        self.a.append(a)
        self.b.append(b)
        self.c.append(float(c))
        return Node(self, len(self.ops) - 1)

    def const(self, value: float) -> "Node":
        key = float(value)
        node = self._consts.get(key)
        if node is None:
            node = self.emit(CONST, c=key)
            self._consts[key] = node
        return node

    def finish(self, out: "Node", n_seeds: int) -> Tape:
        # make the output the last instruction so kernels can read it there
        if out.index != len(self.ops) - 1:
            out = self.emit(ADDC, out.index, 0, 0.0)
        return Tape(
            ops=np.array(self.ops, dtype=np.int64),
            arg_a=np.array(self.a, dtype=np.int64),
            arg_b=np.array(self.b, dtype=np.int64),
            consts=np.array(self.c, dtype=np.float64),
            n_seeds=n_seeds,
        )


class Node:
    __slots__ = ("rec", "index")

    def __init__(self, rec: Recorder, index: int):
        self.rec = rec
        self.index = index

    def __add__(self, other):
        if isinstance(other, Node):
            return self.rec.emit(ADD, self.index, other.index)
        if other == 0:
            return self
        return self.rec.emit(ADDC, self.index, 0, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Node):
            return self.rec.emit(SUB, self.index, other.index)
        if other == 0:
            return self
        return self.rec.emit(ADDC, self.index, 0, -float(other))

    def __rsub__(self, other):
        return self.rec.emit(RSUBC, self.index, 0, other)

    def __neg__(self):
        return self.rec.emit(NEG, self.index)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Node):
            return self.rec.emit(MUL, self.index, other.index)
        if other == 1:
            return self
        return self.rec.emit(MULC, self.index, 0, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Node):
            return self.rec.emit(DIV, self.index, other.index)
        return self.rec.emit(MULC, self.index, 0, 1.0 / float(other))

    def __rtruediv__(self, other):
        return self.rec.emit(RDIVC, self.index, 0, other)

    def __pow__(self, exponent):
        if isinstance(exponent, Node):
            return exp(exponent * log(self))
        p = float(exponent)
        if p == 0.0:
            return self.rec.const(1.0)
        if p == int(p) and 0 < p <= 4:
            result = self
            for _ in range(int(p) - 1):
                result = result * self
            return result
        return self.rec.emit(POWC, self.index, 0, p)

    def __repr__(self):
        return f"Node(#{self.index})"


def _unary(op, fallback):
    def fn(x):
        if isinstance(x, Node):
            return x.rec.emit(op, x.index)
        return fallback(x)

    return fn


sin = _unary(SIN, math.sin)
cos = _unary(COS, math.cos)
exp = _unary(EXP, math.exp)
log = _unary(LOG, math.log)
sqrt = _unary(SQRT, math.sqrt)

TRACE_MATH = SimpleNamespace(sin=sin, cos=cos, exp=exp, log=log, sqrt=sqrt)


def trace(func, n_seeds: int) -> Tape:
    """Record ``func(xs, math_ns)`` where ``xs`` is a list of seed nodes."""
    rec = Recorder()
    xs = [rec.emit(VAR, k) for k in range(n_seeds)]
    out = func(xs, TRACE_MATH)
    if not isinstance(out, Node):
        out = rec.const(float(out))
    return rec.finish(out, n_seeds)
