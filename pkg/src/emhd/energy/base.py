"""Energy-function contract and derivative evaluation.

An energy is a scalar ``H(phi_s, phi_r, theta, rho)``; currents, speed and
torque are its partial derivatives.  Subclasses implement only
:meth:`EnergyFunction.magnetic`, written with ordinary arithmetic and the
functions of the math namespace ``m`` they receive, so the same body runs on
floats, :class:`~emhd.dual.Dual2` numbers and tape nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..dual import DUAL_MATH, Dual2, seed
from ..errors import EvaluationError, ParameterError
from ..frames import Frame
from ..tape import TRACE_MATH, Node, Tape, trace

__all__ = [
    "MechanicalParams",
    "EnergyFunction",
    "EnergyDerivatives",
    "eval_with_derivatives",
    "math_for",
    "N_SEEDS",
]

N_SEEDS = 7  # phi_s (3), phi_r (3), theta


@dataclass(frozen=True)
class MechanicalParams:
    J: float  # kg m^2
    n: int  # pole pairs

    def __post_init__(self):
        if not (self.J > 0 and math.isfinite(self.J)):
            raise ParameterError(f"moment of inertia must be positive, got {self.J}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"pole pairs must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    def kinetic(self, rho):
        return rho * rho / (2.0 * self.J * self.n**2)


def math_for(*args):
    """Math namespace matching the scalar type of ``args``."""
    for a in args:
        if isinstance(a, Node):
            return TRACE_MATH
    for a in args:
        if isinstance(a, Dual2):
            return DUAL_MATH
    for a in args:
        if isinstance(a, np.ndarray) and a.ndim:
            return np
    return math


class EnergyFunction:
    """Base class for ``H = magnetic(phi_s, phi_r, theta) + rho^2 / (2 J n^2)``."""

    frame: Frame = Frame.ROTOR_DQ0
    rotor_dim: int = 0
    mech: MechanicalParams
    flux_scale: float = 0.155  # Wb, sets the random test box
    name: str = "energy"

    def magnetic(self, phis, phir, theta, m):
        raise NotImplementedError

    def __call__(self, phis, phir, theta, rho):
        phis = tuple(phis)
        phir = tuple(phir) if phir is not None else (0.0, 0.0, 0.0)
        m = math_for(*phis, *phir, theta)
        return self.magnetic(phis, phir, theta, m) + self.mech.kinetic(rho)

    # tape handling

    traceable: bool = True

    @property
    def tape(self) -> Tape | None:
        if not self.traceable:
            return None
        cached = self.__dict__.get("_tape")
        if cached is None:
            cached = trace(
                lambda xs, m: self.magnetic(tuple(xs[0:3]), tuple(xs[3:6]), xs[6], m),
                N_SEEDS,
            )
            self.__dict__["_tape"] = cached
        return cached

    def derivatives(self, x7, order: int = 2):
        """Magnetic value, gradient (7) and Hessian (7x7) at ``x7``."""
        x7 = np.asarray(x7, dtype=float)
        tape = self.tape
        if tape is not None:
            return kernels.evaluate(tape, x7, order)
        return self.derivatives_dual(x7, order)

    def derivatives_dual(self, x7, order: int = 2):
        xs = seed([float(v) for v in x7])
        out = self.magnetic(tuple(xs[0:3]), tuple(xs[3:6]), xs[6], DUAL_MATH)
        if not isinstance(out, Dual2):
            return float(out), np.zeros(N_SEEDS), np.zeros((N_SEEDS, N_SEEDS))
        return out.value, out.grad, (out.hess if order >= 2 else None)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} frame={self.frame.value} rotor_dim={self.rotor_dim}>"


@dataclass(frozen=True)
class EnergyDerivatives:
    value: float  # J, magnetic + kinetic
    d_phis: np.ndarray  # stator currents, A
    d_phir: np.ndarray | None  # rotor currents, A (None without rotor)
    d_theta: float  # J/rad
    d_rho: float  # 1/(kg m^2) times rho, so that omega = n^2 d_rho
    hessian: np.ndarray | None  # 7x7 over (phi_s, phi_r, theta)

    @property
    def flux_hessian(self) -> np.ndarray:
        k = 6 if self.d_phir is not None else 3
        return self.hessian[:k, :k]


def _pack(phis, phir, theta) -> np.ndarray:
    x = np.zeros(N_SEEDS)
    x[0:3] = np.asarray(phis, dtype=float).reshape(3)
    if phir is not None:
        x[3:6] = np.asarray(phir, dtype=float).reshape(3)
    x[6] = float(theta)
    return x


def eval_with_derivatives(H: EnergyFunction, phis, phir, theta, rho, order: int = 2):
    """All first derivatives (and the Hessian) of ``H`` from one sweep."""
    if hasattr(phis, "values"):
        phis = phis.values
    if phir is not None and hasattr(phir, "values"):
        phir = phir.values
    x = _pack(phis, phir, theta)
    value, grad, hess = H.derivatives(x, order)
    point = np.concatenate([x, [float(rho)]])
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise EvaluationError(
            f"non-finite energy or gradient at point {point.tolist()}", coordinate=point
        )
    if hess is not None and not np.all(np.isfinite(hess)):
        raise EvaluationError(f"non-finite Hessian at point {point.tolist()}", coordinate=point)
    mech = H.mech
    return EnergyDerivatives(
        value=value + mech.kinetic(rho),
        d_phis=grad[0:3].copy(),
        d_phir=grad[3:6].copy() if H.rotor_dim == 3 else None,
        d_theta=float(grad[6]),
        d_rho=float(rho) / (mech.J * mech.n**2),
        hessian=hess,
    )
