"""Reciprocity and geometric-symmetry verification of energies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dual import seed
from ..errors import ConfigurationError
from ..frames import CLARKE, Frame, rot3_matrix
from .base import EnergyFunction

__all__ = [
    "CheckReport",
    "RawCurrentMap",
    "check_reciprocity",
    "check_symmetry",
    "sample_points",
    "SYMMETRY_KINDS",
    "expected_symmetries",
]

SYMMETRY_KINDS = ("stator_perm", "stator_rev", "rotor_rev", "rotor_perm", "swapQ", "swapD")
TOL = 1e-10


@dataclass(frozen=True)
class CheckReport:
    name: str
    value: float
    threshold: float
    passed: bool
    n_points: int = 0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name} value={self.value:.3e} threshold={self.threshold:.1e} {verdict}"


def sample_points(H: EnergyFunction, n: int, rng: np.random.Generator, flux_bound=None) -> np.ndarray:
    """Random rows (phi_s, phi_r, theta, rho) in the standard test box.

    Fluxes lie within twice the model flux scale per axis, theta within
    +-2 pi and rho up to J (2 pi 100) n.
    """
    fb = 2.0 * H.flux_scale if flux_bound is None else flux_bound
    pts = np.empty((n, 8))
    pts[:, 0:6] = rng.uniform(-fb, fb, size=(n, 6))
    if H.rotor_dim == 0:
        pts[:, 3:6] = 0.0
    pts[:, 6] = rng.uniform(-2 * math.pi, 2 * math.pi, size=n)
    rho_max = H.mech.J * 2 * math.pi * 100 * H.mech.n
    pts[:, 7] = rng.uniform(-rho_max, rho_max, size=n)
    return pts


class RawCurrentMap:
    """Adapter exposing an arbitrary flux-to-current map for reciprocity checks.

    ``func(phi)`` takes the 6 flux coordinates (stator then rotor) and
    returns the 6 currents.  Such a map need not be a gradient.
    """

    def __init__(self, func: Callable, name: str = "raw_map"):
        self.func = func
        self.name = name

    def jacobian(self, x6) -> np.ndarray:
        xs = seed([float(v) for v in x6])
        out = self.func(xs)
        J = np.zeros((6, 6))
        for k, ik in enumerate(out):
            J[k] = ik.grad if hasattr(ik, "grad") else 0.0
        return J


def check_reciprocity(H, points, threshold: float = TOL) -> CheckReport:
    """Largest asymmetry of the flux-to-current Jacobian over ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    for p in points:
        if isinstance(H, RawCurrentMap):
            J = H.jacobian(p[0:6])
        else:
            _, _, hess = H.derivatives(p[0:7], order=2)
            J = hess[0:6, 0:6]
        worst = max(worst, float(np.abs(J - J.T).max()))
    name = f"reciprocity[{getattr(H, 'name', 'energy')}]"
    return CheckReport(name, worst, threshold, worst < threshold, len(points))


_P_ABC = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
_O_ABC = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
_O_AB0 = np.diag([1.0, -1.0, 1.0])
_R120 = rot3_matrix(2 * math.pi / 3)


def _transform(kind: str, frame: Frame, eta: float):
    """Map (phi_s, phi_r, theta, rho) -> arguments of the right-hand side."""
    third = 2 * math.pi / 3
    I = np.eye(3)

    def lin(Ms, Mr, dtheta, theta_sign=1.0, rho_sign=1.0):
        return lambda s, r, th, rho: (Ms @ s, Mr @ r, theta_sign * th + dtheta, rho_sign * rho)

    if kind == "stator_perm":
        table = {
            Frame.ABC: lin(_P_ABC, I, third),
            Frame.ALPHABETA0: lin(_R120, I, third),
            Frame.ROTOR_DQ0: lin(I, I, third),
            Frame.DQ0: lin(_R120, _R120, third),
        }
    elif kind == "stator_rev":
        table = {
            Frame.ABC: lin(-I, I, math.pi),
            Frame.ALPHABETA0: lin(-I, I, math.pi),
            Frame.ROTOR_DQ0: lin(np.diag([1.0, 1.0, -1.0]), I, math.pi),
            Frame.DQ0: lin(-I, np.diag([-1.0, -1.0, 1.0]), math.pi),
        }
    elif kind == "rotor_rev":
        table = {
            Frame.ABC: lin(I, -I, math.pi),
            Frame.ALPHABETA0: lin(I, -I, math.pi),
            Frame.ROTOR_DQ0: lin(np.diag([-1.0, -1.0, 1.0]), -I, math.pi),
            Frame.DQ0: lin(I, np.diag([1.0, 1.0, -1.0]), math.pi),
        }
    elif kind == "rotor_perm":
        table = {
            Frame.ALPHABETA0: lin(I, rot3_matrix(-eta), eta),
            Frame.DQ0: lin(I, I, eta),
        }
    elif kind == "swapQ":
        flipq = np.diag([1.0, -1.0, 1.0])
        table = {
            Frame.ABC: lin(_O_ABC, _O_ABC, 0.0, -1.0, -1.0),
            Frame.ALPHABETA0: lin(_O_AB0, _O_AB0, 0.0, -1.0, -1.0),
            Frame.ROTOR_DQ0: lin(flipq, flipq, 0.0, -1.0, -1.0),
            Frame.DQ0: lin(flipq, flipq, 0.0, -1.0, -1.0),
        }
    elif kind == "swapD":
        flipd = np.diag([-1.0, 1.0, 1.0])
        table = {
            Frame.ROTOR_DQ0: lin(flipd, flipd, 0.0, -1.0, -1.0),
            Frame.DQ0: lin(flipd, flipd, 0.0, -1.0, -1.0),
        }
    else:
        raise ConfigurationError(f"unknown symmetry {kind!r}; expected one of {SYMMETRY_KINDS}")
    if frame not in table:
        raise ConfigurationError(f"symmetry {kind} is not defined in frame {frame.value}")
    return table[frame]


def check_symmetry(
    H: EnergyFunction, kind: str, points, eta: float = 2 * math.pi / 3, threshold: float = TOL
) -> CheckReport:
    """Largest ``|H(x) - H(T x)|`` over ``points`` for the symmetry ``kind``."""
    T = _transform(kind, Frame(H.frame), eta)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    s, r, th, rho = points[:, 0:3].T, points[:, 3:6].T, points[:, 6], points[:, 7]
    s2, r2, th2, rho2 = T(s, r, th, rho)
    try:
        # energies written with plain arithmetic evaluate whole columns at once
        lhs = np.asarray(H(s, r, th, rho), dtype=float)
        rhs = np.asarray(H(s2, r2, th2, rho2), dtype=float)
        diff = np.abs(lhs - rhs)
        worst = float(diff.max()) if diff.size else 0.0
    except (TypeError, ValueError):
        worst = 0.0
        for k in range(len(points)):
            a = H(s[:, k], r[:, k], th[k], rho[k])
            b = H(s2[:, k], r2[:, k], th2[k], rho2[k])
            worst = max(worst, abs(a - b))
    label = kind if kind != "rotor_perm" else f"rotor_perm(eta={eta:.6g})"
    return CheckReport(f"symmetry[{H.name}:{label}]", worst, threshold, worst < threshold, len(points))


def expected_symmetries(H: EnergyFunction) -> tuple[tuple[str, bool], ...]:
    """Symmetries each built-in model is constructed to satisfy (True) or break (False)."""
    from .models import IMEnergy, NonSinusoidalEnergy, PMSMEnergy, SaturatedPMSMEnergy, SynRMEnergy

    if isinstance(H, SynRMEnergy):
        return (("stator_perm", True), ("stator_rev", True), ("swapQ", True), ("swapD", True))
    if isinstance(H, PMSMEnergy):
        broken = H.params.phi_m == 0
        return (("stator_perm", True), ("stator_rev", True), ("swapQ", True), ("swapD", broken))
    if isinstance(H, SaturatedPMSMEnergy):
        return (("stator_perm", True), ("stator_rev", True), ("swapQ", True), ("swapD", False))
    if isinstance(H, IMEnergy):
        return (
            ("stator_perm", True),
            ("stator_rev", True),
            ("rotor_rev", True),
            ("rotor_perm", True),
            ("swapQ", True),
        )
    if isinstance(H, NonSinusoidalEnergy):
        return (("stator_perm", True), ("stator_rev", True))
    return ()
