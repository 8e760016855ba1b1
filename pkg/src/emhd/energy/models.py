"""Built-in motor energies and frame transformation of energies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, ParameterError, SymmetryViolationError
from ..frames import CLARKE, Frame
from .base import EnergyFunction, MechanicalParams

__all__ = [
    "QuadraticEnergyParams",
    "PMSMParams",
    "IMParams",
    "SaturatedPMSMParams",
    "NonSinusoidalTerm",
    "QuadraticEnergy",
    "SynRMEnergy",
    "PMSMEnergy",
    "IMEnergy",
    "SaturatedPMSMEnergy",
    "NonSinusoidalEnergy",
    "TransformedEnergy",
    "build_quadratic",
    "build_synrm",
    "build_pmsm",
    "build_im",
    "build_saturated_pmsm",
    "build_nonsinusoidal_pmsm",
    "transform_energy",
    "reference_mech",
    "reference_saturated_params",
    "N_QUADRATIC_COEFFICIENTS",
]

N_QUADRATIC_COEFFICIENTS = 27  # b:3, c:3, D:6, E:9, F:6


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive and finite, got {value}")


def reference_mech() -> MechanicalParams:
    """Mechanical data of the 1.5 kW reference PMSM."""
    return MechanicalParams(J=5.3e-3, n=5)


# -- parameter records -------------------------------------------------------


@dataclass(frozen=True)
class QuadraticEnergyParams:
    a: float = 0.0
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    c: np.ndarray = field(default_factory=lambda: np.zeros(3))
    D: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    E: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    F: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        for name, shape in (("b", (3,)), ("c", (3,)), ("D", (3, 3)), ("E", (3, 3)), ("F", (3, 3))):
            arr = np.array(getattr(self, name), dtype=float).reshape(shape)
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"non-finite entries in {name}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "a", float(self.a))
        for name in ("D", "F"):
            M = getattr(self, name)
            scale = max(1.0, float(np.abs(M).max()))
            if np.abs(M - M.T).max() > 1e-12 * scale:
                raise ParameterError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(self.D).min() <= 0:
            raise ParameterError("D must be positive definite")
        if self.has_rotor and np.linalg.eigvalsh(self.F).min() <= 0:
            raise ParameterError("F must be positive definite when the rotor is present")

    @property
    def has_rotor(self) -> bool:
        return bool(np.any(self.c) or np.any(self.E) or np.any(self.F))

    def coefficients(self) -> np.ndarray:
        """The free coefficients (b, c, upper D, E, upper F); a is excluded."""
        iu = np.triu_indices(3)
        return np.concatenate([self.b, self.c, self.D[iu], self.E.ravel(), self.F[iu]])


@dataclass(frozen=True)
class PMSMParams:
    gamma_d: float  # A/Wb
    gamma_q: float  # A/Wb
    gamma_0: float  # A/Wb
    phi_m: float  # Wb
    mech: MechanicalParams

    def __post_init__(self):
        for name in ("gamma_d", "gamma_q", "gamma_0"):
            _positive(name, getattr(self, name))
        if not (self.phi_m >= 0 and math.isfinite(self.phi_m)):
            raise ParameterError(f"phi_m must be nonnegative, got {self.phi_m}")


@dataclass(frozen=True)
class IMParams:
    gamma_m: float
    gamma_ls: float
    gamma_lr: float
    gamma_ls0: float
    gamma_lr0: float
    mech: MechanicalParams

    def __post_init__(self):
        for name in ("gamma_m", "gamma_ls", "gamma_lr", "gamma_ls0", "gamma_lr0"):
            _positive(name, getattr(self, name))


SATURATION_NAMES = ("gamma_d", "gamma_q", "phi1_d", "phi2_d", "phi1_q", "phi1_x", "phi2_x")


@dataclass(frozen=True)
class SaturatedPMSMParams:
    gamma_d: float  # A/Wb
    gamma_q: float  # A/Wb
    phi_m: float  # Wb
    phi1_d: float  # Wb
    phi2_d: float  # Wb
    phi1_q: float  # Wb
    phi1_x: float  # Wb
    phi2_x: float  # Wb
    mech: MechanicalParams
    gamma_0: float | None = None  # 0-axis stiffness, defaults to gamma_d

    def __post_init__(self):
        for name in ("gamma_d", "gamma_q", "phi_m", "phi1_d", "phi2_d", "phi1_q", "phi1_x", "phi2_x"):
            _positive(name, getattr(self, name))
        if self.gamma_0 is None:
            object.__setattr__(self, "gamma_0", self.gamma_d)
        _positive("gamma_0", self.gamma_0)

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in SATURATION_NAMES])

    def with_vector(self, values) -> "SaturatedPMSMParams":
        kw = dict(zip(SATURATION_NAMES, (float(v) for v in values)))
        return SaturatedPMSMParams(
            phi_m=self.phi_m, mech=self.mech, gamma_0=self.gamma_0, **kw
        )


def reference_saturated_params(mech: MechanicalParams | None = None) -> SaturatedPMSMParams:
    """Identified saturation model of the reference PMSM."""
    return SaturatedPMSMParams(
        gamma_d=1.0 / 8.8e-3,
        gamma_q=1.0 / 7.7e-3,
        phi_m=0.155,
        phi1_d=0.533,
        phi2_d=0.200,
        phi1_q=0.228,
        phi1_x=0.116,
        phi2_x=0.111,
        mech=mech or reference_mech(),
    )


@dataclass(frozen=True)
class NonSinusoidalTerm:
    """``(sum c psi^i (phi_Q^2)^j phi_0^l) * cos(order theta)`` plus the sine analogue.

    ``cos_coeff`` and ``sin_coeff`` are tuples of ``(i, j, l, c)`` monomials
    with ``psi = phi_D - Phi_M``.
    """

    order: int
    cos_coeff: tuple = ()
    sin_coeff: tuple = ()

    def __post_init__(self):
        if int(self.order) != self.order or self.order <= 0:
            raise ParameterError(f"harmonic order must be a positive integer, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        for name in ("cos_coeff", "sin_coeff"):
            monos = []
            for mono in getattr(self, name):
                i, j, l, c = mono
                if min(i, j, l) < 0 or int(i) != i or int(j) != j or int(l) != l:
                    raise ParameterError(f"monomial exponents must be nonnegative integers: {mono}")
                monos.append((int(i), int(j), int(l), float(c)))
            object.__setattr__(self, name, tuple(monos))

    @property
    def monomials(self):
        return self.cos_coeff + self.sin_coeff


# -- energies ----------------------------------------------------------------


class QuadraticEnergy(EnergyFunction):
    name = "quadratic"

    def __init__(self, params: QuadraticEnergyParams, mech: MechanicalParams, frame=Frame.ROTOR_DQ0):
        self.params = params
        self.mech = mech
        self.frame = Frame(frame)
        self.rotor_dim = 3 if params.has_rotor else 0

    def magnetic(self, phis, phir, theta, m):
        p = self.params
        out = p.a
        for i in range(3):
            if p.b[i]:
                out = out + p.b[i] * phis[i]
            for j in range(3):
                if p.D[i, j]:
                    out = out + p.D[i, j] * phis[i] * phis[j]
        if self.rotor_dim:
            for i in range(3):
                if p.c[i]:
                    out = out + p.c[i] * phir[i]
                for j in range(3):
                    if p.E[i, j]:
                        out = out + p.E[i, j] * phir[i] * phis[j]
                    if p.F[i, j]:
                        out = out + p.F[i, j] * phir[i] * phir[j]
        return out

    def analytic_gradient(self, phis, phir, theta):
        p = self.params
        phis = np.asarray(phis, float)
        phir = np.asarray(phir, float)
        i_s = p.b + 2.0 * p.D @ phis + p.E.T @ phir
        i_r = p.c + p.E @ phis + 2.0 * p.F @ phir
        return i_s, i_r, 0.0


class PMSMEnergy(EnergyFunction):
    name = "pmsm"
    frame = Frame.ROTOR_DQ0
    rotor_dim = 0

    def __init__(self, params: PMSMParams):
        self.params = params
        self.mech = params.mech
        self.flux_scale = params.phi_m if params.phi_m > 0 else 0.155

    def magnetic(self, phis, phir, theta, m):
        p = self.params
        psi = phis[0] - p.phi_m
        return 0.5 * p.gamma_d * psi * psi + 0.5 * p.gamma_q * phis[1] * phis[1] + 0.5 * p.gamma_0 * phis[2] * phis[2]

    def analytic_gradient(self, phis, phir, theta):
        p = self.params
        i_s = np.array([p.gamma_d * (phis[0] - p.phi_m), p.gamma_q * phis[1], p.gamma_0 * phis[2]])
        return i_s, np.zeros(3), 0.0


class SynRMEnergy(PMSMEnergy):
    name = "synrm"

    def __init__(self, gamma_d, gamma_q, gamma_0, mech):
        super().__init__(PMSMParams(gamma_d, gamma_q, gamma_0, 0.0, mech))


class IMEnergy(EnergyFunction):
    name = "im"
    frame = Frame.DQ0
    rotor_dim = 3
    flux_scale = 0.5

    def __init__(self, params: IMParams):
        self.params = params
        self.mech = params.mech

    def magnetic(self, phis, phir, theta, m):
        p = self.params
        sd = phis[0] + phir[0]
        sq = phis[1] + phir[1]
        return (
            0.5 * p.gamma_ls0 * phis[2] * phis[2]
            + 0.5 * p.gamma_lr0 * phir[2] * phir[2]
            + 0.5 * p.gamma_m * (sd * sd + sq * sq)
            + 0.5 * p.gamma_ls * (phis[0] * phis[0] + phis[1] * phis[1])
            + 0.5 * p.gamma_lr * (phir[0] * phir[0] + phir[1] * phir[1])
        )

    def analytic_gradient(self, phis, phir, theta):
        p = self.params
        phis = np.asarray(phis, float)
        phir = np.asarray(phir, float)
        s = phis[:2] + phir[:2]
        i_s = np.append(p.gamma_m * s + p.gamma_ls * phis[:2], p.gamma_ls0 * phis[2])
        i_r = np.append(p.gamma_m * s + p.gamma_lr * phir[:2], p.gamma_lr0 * phir[2])
        return i_s, i_r, 0.0


class SaturatedPMSMEnergy(EnergyFunction):
    name = "saturated_pmsm"
    frame = Frame.ROTOR_DQ0
    rotor_dim = 0

    def __init__(self, params: SaturatedPMSMParams):
        self.params = params
        self.mech = params.mech
        self.flux_scale = params.phi_m

    def mean_dq(self, psi, q):
        """The fundamental (theta-free) DQ energy as a function of psi and phi_Q^2."""
        p = self.params
        # explicit products keep float and dual evaluations bit-identical
        psi2 = psi * psi
        f_d = p.gamma_d * (psi2 + psi2 * psi / (6.0 * p.phi1_d) + psi2 * psi2 / (12.0 * p.phi2_d**2))
        f_q = p.gamma_q * (q + q * q / (12.0 * p.phi1_q**2))
        f_x = p.gamma_d * (psi / (2.0 * p.phi1_x) + psi2 / p.phi2_x**2) * q
        return 0.5 * f_d + 0.5 * f_q + 0.5 * f_x

    def magnetic(self, phis, phir, theta, m):
        psi = phis[0] - self.params.phi_m
        q = phis[1] * phis[1]
        return self.mean_dq(psi, q) + 0.5 * self.params.gamma_0 * phis[2] * phis[2]

    def analytic_gradient(self, phis, phir, theta):
        p = self.params
        psi = phis[0] - p.phi_m
        fq = phis[1]
        q = fq * fq
        i_d = p.gamma_d * (psi + psi**2 / (4 * p.phi1_d) + psi**3 / (6 * p.phi2_d**2)) + 0.5 * p.gamma_d * (
            1.0 / (2 * p.phi1_x) + 2 * psi / p.phi2_x**2
        ) * q
        i_q = p.gamma_q * (fq + fq**3 / (6 * p.phi1_q**2)) + p.gamma_d * (
            psi / (2 * p.phi1_x) + psi**2 / p.phi2_x**2
        ) * fq
        return np.array([i_d, i_q, p.gamma_0 * phis[2]]), np.zeros(3), 0.0


class NonSinusoidalEnergy(EnergyFunction):
    name = "nonsinusoidal_pmsm"
    frame = Frame.ROTOR_DQ0
    rotor_dim = 0

    def __init__(self, base: EnergyFunction, phi_m: float, terms):
        self.base = base
        self.phi_m = float(phi_m)
        self.terms = tuple(terms)
        self.mech = base.mech
        self.flux_scale = base.flux_scale

    @staticmethod
    def _poly(monos, psi, q, z):
        out = 0.0
        for i, j, l, c in monos:
            term = c
            for _ in range(i):
                term = term * psi
            for _ in range(j):
                term = term * q
            for _ in range(l):
                term = term * z
            out = out + term
        return out

    def magnetic(self, phis, phir, theta, m):
        out = self.base.magnetic(phis, phir, theta, m)
        psi = phis[0] - self.phi_m
        q = phis[1] * phis[1]
        z = phis[2]
        for term in self.terms:
            angle = term.order * theta
            if term.cos_coeff:
                out = out + self._poly(term.cos_coeff, psi, q, z) * m.cos(angle)
            if term.sin_coeff:
                out = out + self._poly(term.sin_coeff, psi, q, z) * m.sin(angle)
        return out


# -- builders -----------------------------------------------------------------


def build_quadratic(params: QuadraticEnergyParams, mech: MechanicalParams, frame=Frame.ROTOR_DQ0) -> QuadraticEnergy:
    return QuadraticEnergy(params, mech, frame)


def build_synrm(gamma_d: float, gamma_q: float, gamma_0: float, mech: MechanicalParams) -> SynRMEnergy:
    return SynRMEnergy(gamma_d, gamma_q, gamma_0, mech)


def build_pmsm(params: PMSMParams) -> PMSMEnergy:
    return PMSMEnergy(params)


def build_im(params: IMParams) -> IMEnergy:
    return IMEnergy(params)


def build_saturated_pmsm(params: SaturatedPMSMParams) -> SaturatedPMSMEnergy:
    return SaturatedPMSMEnergy(params)


def build_nonsinusoidal_pmsm(base_params, terms, star_reduced: bool = False) -> NonSinusoidalEnergy:
    """Add ``cos/sin(3k theta)`` terms to a PMSM energy.

    Each term must respect the stator permutation (order divisible by 3) and
    the stator reversal parity (phi_0 exponents of parity ``order/3``).
    ``star_reduced=True`` targets a 0-free energy, which allows only orders
    divisible by 6 and no phi_0 dependence.
    """
    terms = list(terms)
    for term in terms:
        if term.order % 3:
            raise SymmetryViolationError(
                f"harmonic order {term.order} is not a multiple of 3 (stator phase permutation)"
            )
        parity = (term.order // 3) % 2
        for i, j, l, c in term.monomials:
            if c != 0 and l % 2 != parity:
                raise SymmetryViolationError(
                    f"order-{term.order} term has phi_0 power {l}; stator reversal requires parity {parity}"
                )
        if star_reduced:
            if term.order % 6:
                raise SymmetryViolationError(
                    f"star-reduced energies carry only orders 6k, got {term.order}"
                )
            if any(l for _, _, l, c in term.monomials if c != 0):
                raise SymmetryViolationError("star-reduced energies cannot depend on phi_0")
    if isinstance(base_params, SaturatedPMSMParams):
        base = build_saturated_pmsm(base_params)
    elif isinstance(base_params, PMSMParams):
        base = build_pmsm(base_params)
    else:
        raise ParameterError(f"unsupported base parameters {type(base_params).__name__}")
    return NonSinusoidalEnergy(base, base_params.phi_m, terms)


# -- frame transformation ------------------------------------------------------


def _rot(c, s, v):
    return (c * v[0] - s * v[1], s * v[0] + c * v[1], v[2])


def _mat(M, v):
    return tuple(M[i, 0] * v[0] + M[i, 1] * v[1] + M[i, 2] * v[2] for i in range(3))


class TransformedEnergy(EnergyFunction):
    """``base`` re-expressed in another frame.

    Energies given in dq0 are independent of theta_s, so they are mapped
    through the dq0 frame at theta_s = 0.  Targeting dq0 from any other
    frame would introduce a theta_s dependence and is rejected.
    """

    def __init__(self, base: EnergyFunction, frame: Frame):
        frame = Frame(frame)
        if frame is Frame.DQ0 and base.frame is not Frame.DQ0:
            raise ConfigurationError(
                "energies can be expressed in dq0 only when given in dq0 (theta_s dependence)"
            )
        self.base = base
        self.frame = frame
        self.rotor_dim = base.rotor_dim
        self.mech = base.mech
        self.flux_scale = base.flux_scale
        self.name = f"{base.name}@{frame.value}"
        self.traceable = base.traceable

    def magnetic(self, phis, phir, theta, m):
        c, s = m.cos(theta), m.sin(theta)
        # target frame -> alpha-beta-0
        src, tgt = self.base.frame, self.frame
        if tgt is Frame.ABC:
            fs, fr = _mat(CLARKE, phis), _mat(CLARKE, phir)
        elif tgt is Frame.ROTOR_DQ0:
            fs, fr = _rot(c, s, phis), phir
        elif tgt is Frame.DQ0:
            fs, fr = phis, _rot(c, -s, phir)
        else:
            fs, fr = phis, phir
        # alpha-beta-0 -> base frame
        if src is Frame.ABC:
            fs, fr = _mat(CLARKE.T, fs), _mat(CLARKE.T, fr)
        elif src is Frame.ROTOR_DQ0:
            fs = _rot(c, -s, fs)
        elif src is Frame.DQ0:
            fr = _rot(c, s, fr)
        return self.base.magnetic(fs, fr, theta, m)


def transform_energy(H: EnergyFunction, frame) -> EnergyFunction:
    frame = Frame(frame)
    if H.frame is frame:
        return H
    if isinstance(H, TransformedEnergy):
        return transform_energy(H.base, frame)
    return TransformedEnergy(H, frame)
