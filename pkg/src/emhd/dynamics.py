"""State equations in any frame, connection constraints and multipliers.

State vectors are packed as ``[phi_s (3), phi_r (3), theta, rho]``.  Slots
of the flux part are numbered 0..5 (stator then rotor) and slot 6 is theta.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import system_kernels as sk
from .dual import Dual2
from .energy.base import N_SEEDS, EnergyFunction, eval_with_derivatives
from .energy.models import transform_energy
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegeneracyError,
    EvaluationError,
    NumericError,
)
from .frames import Frame, TriVector

__all__ = [
    "ConnectionScheme",
    "FullState",
    "Inputs",
    "Resistances",
    "Outputs",
    "frame_terms",
    "constitutive",
    "state_derivative",
    "solve_constraint",
    "reduce",
    "ReducedEnergy",
    "lagrange_multiplier",
    "MotorSystem",
    "FRAME_CODES",
]

FRAME_CODES = {Frame.ABC: sk.ABC, Frame.ALPHABETA0: sk.AB0, Frame.DQ0: sk.DQ0_S, Frame.ROTOR_DQ0: sk.DQ0_R}


class ConnectionScheme(str, enum.Enum):
    UNCONNECTED = "unconnected"
    STAR = "star"
    SHORT_ROTOR = "short_rotor"
    NO_ROTOR = "no_rotor"
    STAR_SHORT_ROTOR = "star+short_rotor"
    STAR_NO_ROTOR = "star+no_rotor"

    @property
    def star(self) -> bool:
        return self in (ConnectionScheme.STAR, ConnectionScheme.STAR_SHORT_ROTOR, ConnectionScheme.STAR_NO_ROTOR)

    @property
    def short_rotor(self) -> bool:
        return self in (ConnectionScheme.SHORT_ROTOR, ConnectionScheme.STAR_SHORT_ROTOR)

    @property
    def no_rotor(self) -> bool:
        return self in (ConnectionScheme.NO_ROTOR, ConnectionScheme.STAR_NO_ROTOR)

    def constrained_slots(self, rotor_dim: int) -> tuple[int, ...]:
        """Flux slots fixed by the constraint ``dH/dx = 0``."""
        slots = []
        if self.star:
            slots.append(2)
        if self.short_rotor:
            slots.append(5)
        if self.no_rotor and rotor_dim == 3:
            slots.extend([3, 4, 5])
        return tuple(slots)

    def validate(self, H: EnergyFunction, frame: Frame) -> None:
        if H.rotor_dim == 0 and not self.no_rotor:
            raise ConfigurationError(
                f"energy {H.name} has no rotor windings; use scheme 'no_rotor' or 'star+no_rotor', not {self.value!r}"
            )
        if (self.star or self.short_rotor) and Frame(frame) is Frame.ABC:
            raise ConfigurationError("star and short-rotor constraints need a frame with a 0-axis (not abc)")


@dataclass(frozen=True)
class Resistances:
    Rs: float  # Ohm
    Rr: float = 0.0  # Ohm

    def __post_init__(self):
        if self.Rs < 0 or self.Rr < 0 or not (math.isfinite(self.Rs) and math.isfinite(self.Rr)):
            raise ConfigurationError(f"resistances must be nonnegative, got Rs={self.Rs}, Rr={self.Rr}")


@dataclass(frozen=True)
class FullState:
    phis: TriVector
    phir: TriVector | None
    theta: float  # rad, electrical, unwrapped
    rho: float  # kg m^2 / s
    frame: Frame

    @classmethod
    def from_array(cls, x, frame, rotor_dim: int = 3) -> "FullState":
        x = np.asarray(x, dtype=float)
        frame = Frame(frame)
        phir = TriVector(x[3:6], frame) if rotor_dim == 3 else None
        return cls(TriVector(x[0:3], frame), phir, float(x[6]), float(x[7]), frame)

    def to_array(self) -> np.ndarray:
        x = np.zeros(8)
        x[0:3] = self.phis.values
        if self.phir is not None:
            x[3:6] = self.phir.values
        x[6] = self.theta
        x[7] = self.rho
        return x


@dataclass(frozen=True)
class Inputs:
    u: TriVector  # V, winding voltages (or potentials for a star stator)
    T_l: float = 0.0  # N m
    theta_s: float = 0.0  # rad, dq0 only
    omega_s: float = 0.0  # rad/s, dq0 only


@dataclass(frozen=True)
class Outputs:
    i_s: TriVector  # A
    i_r: TriVector | None  # A
    omega: float  # rad/s
    Te: float  # N m
    mu: np.ndarray | None = None  # V, one per constrained slot
    v_N: float | None = None  # V, star point potential


def frame_terms(frame, phis, phir, i_s, i_r, omega: float, omega_s: float, n: int):
    """``(Omega_s, Omega_r, Te_extra)`` of the pseudo-Hamiltonian in ``frame``."""
    x = np.zeros(8)
    grad = np.zeros(7)
    x[0:3] = np.asarray(phis, float).reshape(3)
    grad[0:3] = np.asarray(i_s, float).reshape(3)
    if phir is not None:
        x[3:6] = np.asarray(phir, float).reshape(3)
        grad[3:6] = np.asarray(i_r, float).reshape(3)
    a, b, c = sk.frame_terms_py(FRAME_CODES[Frame(frame)], x, grad, float(omega), float(omega_s), float(n))
    return float(a), float(b), float(c)


def constitutive(H: EnergyFunction, state: FullState, omega_s: float = 0.0) -> Outputs:
    """Currents, speed and torque from the gradient of ``H``."""
    if Frame(state.frame) is not Frame(H.frame):
        raise ConfigurationError(f"state in {state.frame.value} but energy in {H.frame.value}")
    phir = state.phir.values if state.phir is not None else None
    d = eval_with_derivatives(H, state.phis.values, phir, state.theta, state.rho, order=1)
    omega = H.mech.n**2 * d.d_rho
    i_r = d.d_phir if d.d_phir is not None else np.zeros(3)
    _, _, te_extra = frame_terms(H.frame, state.phis.values, phir, d.d_phis, i_r, omega, omega_s, H.mech.n)
    te = -H.mech.n * d.d_theta + te_extra
    return Outputs(
        TriVector(d.d_phis, H.frame),
        TriVector(d.d_phir, H.frame) if d.d_phir is not None else None,
        omega,
        te,
    )


def solve_constraint(H: EnergyFunction, x7, slots, guess=None) -> np.ndarray:
    """Newton solve of ``dH/dx[slots] = 0`` for ``x[slots]``, other coordinates fixed.

    Starts from ``guess`` (zero by default); residual tolerance 1e-12 A,
    at most 50 iterations.
    """
    slots = list(slots)
    x = np.array(x7, dtype=float)
    x[slots] = 0.0 if guess is None else np.asarray(guess, float)
    for it in range(sk.NEWTON_MAXIT + 1):
        _, grad, hess = H.derivatives(x, order=2)
        r = grad[slots]
        if not np.all(np.isfinite(r)):
            raise EvaluationError(f"non-finite constraint residual at {x.tolist()}", coordinate=x.copy())
        if np.abs(r).max() < sk.NEWTON_TOL:
            return x[slots].copy()
        if it == sk.NEWTON_MAXIT:
            break
        A = hess[np.ix_(slots, slots)]
        step, ok = sk.solve_small_py(A, r)
        if not ok:
            raise DegeneracyError(f"constraint Hessian block singular at {x.tolist()} (slots {slots})")
        old = x[slots].copy()
        x[slots] = old - step
        if np.all(np.abs(step) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(old))):
            return x[slots].copy()
    raise ConvergenceError(f"constraint solve did not converge in {sk.NEWTON_MAXIT} iterations")


class ReducedEnergy(EnergyFunction):
    """Energy with constrained flux coordinates eliminated.

    Evaluating at any point solves the constraint for the eliminated slots
    (warm-started from the previous solution).  The gradient equals the full
    gradient at the constrained point; the Hessian is the Schur complement.
    Eliminated slots read as zero in gradients and Hessians.
    """

    traceable = False

    def __init__(self, base: EnergyFunction, scheme: ConnectionScheme):
        scheme = ConnectionScheme(scheme)
        scheme.validate(base, base.frame)
        self.base = base
        self.scheme = scheme
        self.frame = base.frame
        self.mech = base.mech
        self.flux_scale = base.flux_scale
        self.rotor_dim = 0 if scheme.no_rotor else base.rotor_dim
        self.eliminated = scheme.constrained_slots(base.rotor_dim)
        self.name = f"{base.name}|{scheme.value}"
        self._cache = np.zeros(len(self.eliminated))

    def constrained_point(self, x7) -> np.ndarray:
        x = np.array(x7, dtype=float)
        if self.base.rotor_dim == 0:
            x[3:6] = 0.0
        if self.eliminated:
            lam = solve_constraint(self.base, x, self.eliminated, guess=self._cache)
            self._cache = lam
            x[list(self.eliminated)] = lam
        return x

    def derivatives(self, x7, order: int = 2):
        x = self.constrained_point(x7)
        value, grad, hess = self.base.derivatives(x, order=2 if self.eliminated else order)
        grad = grad.copy()
        el = list(self.eliminated)
        if not el:
            return value, grad, hess
        keep = [k for k in range(N_SEEDS) if k not in el]
        grad[el] = 0.0
        red = np.zeros((N_SEEDS, N_SEEDS))
        Hkk = hess[np.ix_(keep, keep)]
        Hke = hess[np.ix_(keep, el)]
        Hee = hess[np.ix_(el, el)]
        red[np.ix_(keep, keep)] = Hkk - Hke @ np.linalg.solve(Hee, Hke.T)
        return value, grad, red

    def magnetic(self, phis, phir, theta, m):
        args = list(phis) + list(phir) + [theta]
        duals = [a for a in args if isinstance(a, Dual2)]
        if not duals:
            x = np.array([float(a) for a in args])
            value, _, _ = self.derivatives(x, order=1)
            return value
        n = duals[0].size
        inputs = [a if isinstance(a, Dual2) else Dual2.constant(float(a), n) for a in args]
        x = np.array([a.value for a in inputs])
        value, grad, hess = self.derivatives(x, order=2)
        return Dual2.compose(value, grad, hess, inputs)


def reduce(H: EnergyFunction, scheme) -> EnergyFunction:
    """Energy in the coordinates left free by ``scheme``."""
    return ReducedEnergy(H, scheme)


class MotorSystem:
    """Energy + connection + resistances packed for the compiled kernels.

    ``method='reduce'`` eliminates constrained fluxes by Newton at every
    evaluation; ``method='multiplier'`` integrates them with the Lagrange
    multiplier added to their derivative.
    """

    def __init__(
        self,
        H: EnergyFunction,
        scheme=ConnectionScheme.UNCONNECTED,
        resistances: Resistances = Resistances(0.0, 0.0),
        frame=None,
        method: str = "reduce",
        prescribed_speed: bool = False,
        load_code: int = sk.LOAD_CONST,
        load_param: float = 0.0,
    ):
        frame = Frame(frame) if frame is not None else Frame(H.frame)
        scheme = ConnectionScheme(scheme)
        if method not in ("reduce", "multiplier"):
            raise ConfigurationError(f"constraint method must be 'reduce' or 'multiplier', got {method!r}")
        scheme.validate(H, frame)
        self.source_energy = H
        self.H = transform_energy(H, frame)
        if self.H.tape is None:
            raise ConfigurationError(f"energy {H.name} cannot be compiled for simulation")
        self.frame = frame
        self.scheme = scheme
        self.resistances = resistances
        self.method = method
        self.prescribed_speed = bool(prescribed_speed)
        rd = self.H.rotor_dim
        self.rotor_dim = rd
        self.constrained = scheme.constrained_slots(rd)
        self.eliminated = self.constrained if method == "reduce" else ()
        used = np.ones(7)
        if rd == 0:
            used[3:6] = 0.0
        self.used = used
        self.elim = np.array(self.eliminated, dtype=np.int64)
        self.cons = np.array(self.constrained, dtype=np.int64)
        mech = self.H.mech
        cfg = np.zeros(sk.CFG_LEN)
        cfg[sk.CFG_N] = mech.n
        cfg[sk.CFG_J] = mech.J
        cfg[sk.CFG_RS] = resistances.Rs
        cfg[sk.CFG_RR] = resistances.Rr
        cfg[sk.CFG_FRAME] = FRAME_CODES[frame]
        cfg[sk.CFG_STAR] = 1.0 if scheme.star else 0.0
        cfg[sk.CFG_PRESCRIBED] = 1.0 if prescribed_speed else 0.0
        cfg[sk.CFG_LOAD] = load_code
        cfg[sk.CFG_LOAD_P] = load_param
        cfg[sk.CFG_METHOD] = 0.0 if method == "reduce" else 1.0
        self.cfg = cfg
        self.lam = np.zeros(len(self.eliminated))

    @property
    def tape(self):
        return self.H.tape

    def constraint_residual(self, x) -> float:
        """Largest ``|dH/dx|`` over constrained slots at the given full state."""
        if not self.constrained:
            return 0.0
        x7 = np.array(x[:7], dtype=float)
        if self.rotor_dim == 0:
            x7[3:6] = 0.0
        _, grad, _ = self.H.derivatives(x7, order=1)
        return float(np.abs(grad[list(self.constrained)]).max())

    def evaluate(self, x, t: float, src: np.ndarray):
        """(dx, xfull, out) at state ``x`` and time ``t``."""
        tape = self.tape
        nn = len(tape)
        val = np.zeros(nn)
        g = np.zeros((nn, 7))
        h = np.zeros((nn, 7, 7))
        dx = np.zeros(8)
        xfull = np.zeros(8)
        out = np.zeros(sk.OUT_LEN)
        status = sk.system_eval(
            np.asarray(x, dtype=float), float(t), self.lam, tape.ops, tape.arg_a, tape.arg_b, tape.consts,
            val, g, h, self.cfg, self.used, self.elim, self.cons, np.asarray(src, dtype=float), dx, xfull, out,
        )
        raise_for_status(status, t)
        return dx, xfull, out

    def mu_labels(self) -> list[str]:
        names = ["s0" if k == 2 else f"r{k - 3}" for k in self.constrained]
        if len(names) == 1:
            return ["mu"]
        return [f"mu_{nm}" for nm in names]


def raise_for_status(status: int, t: float) -> None:
    if status == sk.OK:
        return
    if status == sk.DEGENERATE:
        raise DegeneracyError(f"singular constraint Hessian block at t={t:.9g} s")
    if status == sk.NO_CONVERGENCE:
        raise ConvergenceError(f"constraint Newton solve did not converge at t={t:.9g} s")
    if status == sk.NONFINITE:
        from .errors import DivergenceError

        raise DivergenceError(f"non-finite state derivative at t={t:.9g} s", time=t)
    raise NumericError(f"kernel status {status} at t={t:.9g} s")


def _direct_source(inputs: Inputs) -> np.ndarray:
    src = np.zeros(9)
    src[0] = sk.SRC_DIRECT
    src[1:4] = inputs.u.values
    src[4] = inputs.theta_s
    src[5] = inputs.omega_s
    return src


def state_derivative(H: EnergyFunction, state: FullState, inputs: Inputs, R: Resistances, scheme, method: str = "reduce"):
    """Time derivative of the packed state (8-vector) under ``scheme``.

    The state must be expressed in the energy's frame.  With
    ``method='reduce'`` eliminated slots have zero derivative.
    """
    if Frame(state.frame) is not Frame(H.frame) or inputs.u.frame is not Frame(H.frame):
        raise ConfigurationError("state, inputs and energy must share one frame")
    system = MotorSystem(H, scheme, R, frame=H.frame, method=method, load_param=inputs.T_l)
    dx, _, _ = system.evaluate(state.to_array(), 0.0, _direct_source(inputs))
    return dx


def lagrange_multiplier(H: EnergyFunction, state: FullState, inputs: Inputs, R: Resistances, scheme):
    """Multipliers keeping the constraints satisfied, and the star-point potential.

    Returns ``(mu, v_N)``; ``mu`` has one entry per constrained slot and
    ``v_N`` is None without a star connection.
    """
    scheme = ConnectionScheme(scheme)
    system = MotorSystem(H, scheme, R, frame=H.frame, method="multiplier", load_param=inputs.T_l)
    _, _, out = system.evaluate(state.to_array(), 0.0, _direct_source(inputs))
    nc = len(system.constrained)
    mu = out[sk.O_MU : sk.O_MU + nc].copy()
    v_n = float(out[sk.O_VN]) if scheme.star else None
    return mu, v_n
