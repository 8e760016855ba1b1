"""Scenarios, sources, loads, fixed-step RK4 integration and steady states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from . import system_kernels as sk
from .dynamics import (
    FRAME_CODES,
    ConnectionScheme,
    FullState,
    MotorSystem,
    ReducedEnergy,
    Resistances,
    raise_for_status,
)
from .energy.base import EnergyFunction
from .errors import ConfigurationError, ConvergenceError, DegeneracyError, DivergenceError
from .frames import Frame, axis_labels, convert_array

__all__ = [
    "ConstantDq",
    "ThreePhaseSine",
    "Injection",
    "ConstantTorque",
    "ViscousFriction",
    "Scenario",
    "Trajectory",
    "rk4_step",
    "simulate",
    "steady_state",
    "consistent_state",
    "CONSTRAINT_TOL",
]

CONSTRAINT_TOL = 1e-9  # A, accepted constraint residual of an initial state
CARRIERS = {"square": 0, "sine": 1}


@dataclass(frozen=True)
class ConstantDq:
    """Voltage constant in a rotating frame.

    Interpreted in the rotor frame (DQ0), or in the dq0 frame with
    ``theta_s = omega_s t`` when the simulation runs in dq0.
    """

    v: tuple[float, float]  # V
    v0: float = 0.0  # V
    omega_s: float = 0.0  # rad/s

    def pack(self) -> np.ndarray:
        return np.array([sk.SRC_CONST_DQ, self.v[0], self.v[1], self.v0, self.omega_s, 0, 0, 0, 0], float)


@dataclass(frozen=True)
class ThreePhaseSine:
    """Balanced sinusoidal phase voltages of peak ``amplitude``."""

    amplitude: float  # V
    frequency: float  # Hz
    phase: float = 0.0  # rad

    def pack(self) -> np.ndarray:
        return np.array([sk.SRC_SINE, self.amplitude, self.frequency, self.phase, 0, 0, 0, 0, 0], float)


@dataclass(frozen=True)
class Injection:
    """``v = low + high * f(t)`` in the alpha-beta frame, ``f`` a zero-mean carrier."""

    low: tuple[float, float] = (0.0, 0.0)  # V
    high: tuple[float, float] = (1.0, 0.0)  # V
    carrier: str = "square"
    carrier_freq: float = 1000.0  # Hz

    def __post_init__(self):
        if self.carrier not in CARRIERS:
            raise ConfigurationError(f"carrier must be one of {sorted(CARRIERS)}, got {self.carrier!r}")
        if not self.carrier_freq > 0:
            raise ConfigurationError("carrier_freq must be positive")

    def pack(self) -> np.ndarray:
        return np.array(
            [sk.SRC_INJECTION, self.low[0], self.low[1], self.high[0], self.high[1],
             self.carrier_freq, CARRIERS[self.carrier], 0, 0],
            float,
        )


VoltageSource = Union[ConstantDq, ThreePhaseSine, Injection]


@dataclass(frozen=True)
class ConstantTorque:
    T_l: float = 0.0  # N m

    code = sk.LOAD_CONST

    @property
    def param(self) -> float:
        return self.T_l


@dataclass(frozen=True)
class ViscousFriction:
    """Load torque ``c * omega_mech`` with ``omega_mech = omega / n``."""

    coefficient: float  # N m s

    code = sk.LOAD_VISCOUS

    def __post_init__(self):
        if self.coefficient < 0:
            raise ConfigurationError("friction coefficient must be nonnegative")

    @property
    def param(self) -> float:
        return self.coefficient


LoadModel = Union[ConstantTorque, ViscousFriction]


@dataclass
class Scenario:
    energy: EnergyFunction
    initial: FullState | np.ndarray  # packed 8-vector is taken in ``frame``
    duration: float  # s
    dt: float = 1e-5  # s
    scheme: ConnectionScheme = ConnectionScheme.UNCONNECTED
    frame: Frame | None = None  # defaults to the energy's frame
    source: VoltageSource = field(default_factory=lambda: ConstantDq((0.0, 0.0)))
    load: LoadModel = field(default_factory=ConstantTorque)
    resistances: Resistances = field(default_factory=lambda: Resistances(0.0, 0.0))
    method: str = "reduce"
    prescribed_speed: bool = False

    def __post_init__(self):
        self.scheme = ConnectionScheme(self.scheme)
        self.frame = Frame(self.frame) if self.frame is not None else Frame(self.energy.frame)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.duration >= self.dt:
            raise ConfigurationError(f"duration ({self.duration}) must be at least dt ({self.dt})")
        ratio = self.duration / self.dt
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
            raise ConfigurationError(f"duration/dt must be an integer, got {ratio}")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def system(self) -> MotorSystem:
        return MotorSystem(
            self.energy,
            self.scheme,
            self.resistances,
            frame=self.frame,
            method=self.method,
            prescribed_speed=self.prescribed_speed,
            load_code=self.load.code,
            load_param=self.load.param,
        )

    def initial_array(self) -> np.ndarray:
        """Initial packed state expressed in the simulation frame."""
        s = self.initial
        if not isinstance(s, FullState):
            x = np.asarray(s, dtype=float).reshape(8).copy()
        else:
            x = s.to_array()
            if Frame(s.frame) is not self.frame:
                theta_s = 0.0
                x[0:3] = convert_array(x[0:3], s.frame, self.frame, theta=s.theta, theta_s=theta_s, kind="stator")
                x[3:6] = convert_array(x[3:6], s.frame, self.frame, theta=s.theta, theta_s=theta_s, kind="rotor")
        if not np.all(np.isfinite(x)):
            raise ConfigurationError("initial state must be finite")
        return x


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled states and outputs; row k is time ``t[k]``."""

    t: np.ndarray
    x: np.ndarray  # (N, 8) packed states, eliminated fluxes filled in
    out: np.ndarray  # (N, OUT_LEN) kernel outputs
    frame: Frame
    rotor_dim: int
    scheme: ConnectionScheme
    mu_labels: tuple[str, ...]
    n: int
    J: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    phis = property(lambda self: self.x[:, 0:3])
    phir = property(lambda self: self.x[:, 3:6])
    theta = property(lambda self: self.x[:, 6])
    rho = property(lambda self: self.x[:, 7])
    i_s = property(lambda self: self.out[:, sk.O_IS : sk.O_IS + 3])
    i_r = property(lambda self: self.out[:, sk.O_IR : sk.O_IR + 3])
    omega = property(lambda self: self.out[:, sk.O_OMEGA])
    Te = property(lambda self: self.out[:, sk.O_TE])
    H = property(lambda self: self.out[:, sk.O_H])
    u = property(lambda self: self.out[:, sk.O_U : sk.O_U + 3])
    T_l = property(lambda self: self.out[:, sk.O_TL])
    theta_s = property(lambda self: self.out[:, sk.O_THS])
    v_N = property(lambda self: self.out[:, sk.O_VN])

    @property
    def mu(self) -> np.ndarray:
        return self.out[:, sk.O_MU : sk.O_MU + len(self.mu_labels)]

    def state(self, k: int) -> FullState:
        return FullState.from_array(self.x[k], self.frame, self.rotor_dim)

    def columns(self) -> tuple[list[str], np.ndarray]:
        ax = axis_labels(self.frame)
        names = ["t"] + [f"phi_s{a}" for a in ax]
        cols = [self.t[:, None], self.phis]
        if self.rotor_dim:
            names += [f"phi_r{a}" for a in ax]
            cols.append(self.phir)
        names += ["theta", "rho"] + [f"i_s{a}" for a in ax]
        cols += [self.theta[:, None], self.rho[:, None], self.i_s]
        if self.rotor_dim:
            names += [f"i_r{a}" for a in ax]
            cols.append(self.i_r)
        names += ["omega"] + [f"u_s{a}" for a in ax] + ["T_l", "H", "Te"]
        cols += [self.omega[:, None], self.u, self.T_l[:, None], self.H[:, None], self.Te[:, None]]
        names += list(self.mu_labels)
        cols.append(self.mu)
        if self.scheme.star:
            names.append("v_N")
            cols.append(self.v_N[:, None])
        return names, np.hstack(cols)

    def to_csv(self, path) -> Path:
        names, data = self.columns()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")
        return path


def rk4_step(deriv: Callable, state, inputs, dt: float, t: float = 0.0) -> np.ndarray:
    """One classical RK4 step of ``dx/dt = deriv(x, inputs, t)``."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    x = np.asarray(state, dtype=float)

    def f(xx, tt):
        d = np.asarray(deriv(xx, inputs, tt), dtype=float)
        if not np.all(np.isfinite(d)):
            raise DivergenceError(f"non-finite derivative at t={tt:.9g} s", time=tt)
        return d

    k1 = f(x, t)
    k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(x + dt * k3, t + dt)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def consistent_state(energy: EnergyFunction, x, scheme, frame=None) -> np.ndarray:
    """Copy of packed state ``x`` with constrained fluxes solved exactly."""
    scheme = ConnectionScheme(scheme)
    system = MotorSystem(energy, scheme, frame=frame)
    x = np.array(x, dtype=float)
    if system.rotor_dim == 0:
        x[3:6] = 0.0
    if system.constrained:
        red = ReducedEnergy(system.H, scheme)
        x[0:7] = red.constrained_point(x[0:7])
    return x


def _check_initial(system: MotorSystem, x0: np.ndarray) -> None:
    res = system.constraint_residual(x0)
    if not res < CONSTRAINT_TOL:
        raise ConfigurationError(
            f"initial state violates the {system.scheme.value} constraint (residual {res:.3e} A >= "
            f"{CONSTRAINT_TOL:g} A); use sim.consistent_state to build a consistent one"
        )


def simulate(scenario: Scenario) -> Trajectory:
    """Integrate ``scenario`` with fixed-step RK4; deterministic."""
    system = scenario.system()
    x0 = scenario.initial_array()
    if system.rotor_dim == 0:
        x0[3:6] = 0.0
    _check_initial(system, x0)
    system.lam[:] = x0[list(system.eliminated)] if system.eliminated else 0.0
    n = scenario.n_steps
    traj_x = np.zeros((n + 1, 8))
    traj_out = np.zeros((n + 1, sk.OUT_LEN))
    tape = system.tape
    status, k = sk.rk4_integrate(
        x0, 0.0, float(scenario.dt), n, system.lam, tape.ops, tape.arg_a, tape.arg_b, tape.consts,
        system.cfg, system.used, system.elim, system.cons, scenario.source.pack(), traj_x, traj_out,
    )
    raise_for_status(int(status), k * scenario.dt)
    if not (np.all(np.isfinite(traj_x)) and np.all(np.isfinite(traj_out))):
        bad = int(np.argmax(~(np.isfinite(traj_x).all(1) & np.isfinite(traj_out).all(1))))
        raise DivergenceError(f"non-finite state at t={bad * scenario.dt:.9g} s", time=bad * scenario.dt)
    t = np.arange(n + 1) * scenario.dt
    mech = system.H.mech
    return Trajectory(
        t, traj_x, traj_out, scenario.frame, system.rotor_dim, scenario.scheme,
        tuple(system.mu_labels()) if system.constrained else (), mech.n, mech.J,
    )


def steady_state(scenario: Scenario, omega_target: float, tol: float = 1e-12, max_iter: int = 50) -> FullState:
    """Flux state at constant speed ``omega_target`` (rad/s, electrical) with zero flux derivatives.

    The source is frozen at its value for t = 0 and the initial angle, so
    the simulation frame must rotate with it (DQ0 for ConstantDq, dq0 with
    matching omega_s).  Newton runs on the free flux coordinates of the
    scheme-reduced energy, starting from the scenario's initial fluxes.
    """
    if scenario.frame not in (Frame.DQ0, Frame.ROTOR_DQ0):
        raise ConfigurationError("steady states need a rotating frame (DQ0 or dq0)")
    system = scenario.system()
    H = system.H
    red = ReducedEnergy(H, scenario.scheme) if system.constrained else H
    x = scenario.initial_array()
    if system.rotor_dim == 0:
        x[3:6] = 0.0
    x[7] = H.mech.J * omega_target
    free = [k for k in range(6) if system.used[k] and k not in system.constrained]
    src = scenario.source.pack()
    u = np.zeros(3)
    theta_s, omega_s = sk.source_eval_py(src, 0.0, float(x[6]), FRAME_CODES[scenario.frame], u)
    om_s, om_r = (omega_target, 0.0) if scenario.frame is Frame.ROTOR_DQ0 else (omega_s, omega_s - omega_target)
    Rs, Rr = scenario.resistances.Rs, scenario.resistances.Rr
    R = np.array([Rs, Rs, Rs, Rr, Rr, Rr])
    Om = np.array([om_s, om_s, 0.0, om_r, om_r, 0.0])
    uu = np.concatenate([u, np.zeros(3)])
    rot = np.zeros((6, 6))
    rot[0, 1], rot[1, 0], rot[3, 4], rot[4, 3] = -1.0, 1.0, -1.0, 1.0  # J3 blocks

    def residual(xx):
        _, grad, hess = red.derivatives(xx[0:7], order=2)
        f = uu - R * grad[0:6] - Om * (rot @ xx[0:6])
        jac = -R[:, None] * hess[0:6, 0:6] - Om[:, None] * rot
        return f[free], jac[np.ix_(free, free)]

    for _ in range(max_iter):
        r, jac = residual(x)
        if not np.all(np.isfinite(r)):
            raise ConvergenceError("non-finite residual in steady-state solve")
        if np.abs(r).max() < tol:
            break
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError("singular steady-state Jacobian") from exc
        x[free] -= step
    else:
        r, _ = residual(x)
        if np.abs(r).max() >= tol:
            raise ConvergenceError(f"steady state not found in {max_iter} iterations (residual {np.abs(r).max():.3e})")
    if system.constrained:
        x[0:7] = red.constrained_point(x[0:7])
    return FullState.from_array(x, scenario.frame, system.rotor_dim)
