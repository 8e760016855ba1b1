"""YAML run configuration: schema, validation and object construction."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dynamics import ConnectionScheme, Resistances
from .energy import (
    IMParams,
    MechanicalParams,
    NonSinusoidalTerm,
    PMSMParams,
    QuadraticEnergyParams,
    SaturatedPMSMParams,
    build_im,
    build_nonsinusoidal_pmsm,
    build_pmsm,
    build_quadratic,
    build_saturated_pmsm,
    build_synrm,
)
from .energy.base import EnergyFunction
from .errors import ConfigurationError
from .frames import Frame
from .sim import ConstantDq, ConstantTorque, Injection, Scenario, ThreePhaseSine, ViscousFriction

__all__ = ["RunConfig", "load_config", "parse_config", "build_energy", "build_scenario"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]


class Mech(_Strict):
    J: float = Field(gt=0, description="kg m^2")
    n: int = Field(ge=1, description="pole pairs")


class PMSMModel(_Strict):
    type: Literal["pmsm"]
    mech: Mech
    gamma_d: float  # A/Wb
    gamma_q: float
    gamma_0: Optional[float] = None
    phi_m: float  # Wb


class SynRMModel(_Strict):
    type: Literal["synrm"]
    mech: Mech
    gamma_d: float
    gamma_q: float
    gamma_0: Optional[float] = None


class SaturatedModel(_Strict):
    type: Literal["saturated_pmsm"]
    mech: Mech
    gamma_d: float
    gamma_q: float
    gamma_0: Optional[float] = None
    phi_m: float
    phi1_d: float
    phi2_d: float
    phi1_q: float
    phi1_x: float
    phi2_x: float


class IMModel(_Strict):
    type: Literal["im"]
    mech: Mech
    gamma_m: float
    gamma_ls: float
    gamma_lr: float
    gamma_ls0: float
    gamma_lr0: float


class QuadraticModel(_Strict):
    type: Literal["quadratic"]
    mech: Mech
    frame: str = "DQ0"
    a: float = 0.0
    b: Vec3 = (0.0, 0.0, 0.0)
    c: Vec3 = (0.0, 0.0, 0.0)
    D: Mat3
    E: Mat3 = ((0.0, 0.0, 0.0),) * 3
    F: Mat3 = ((0.0, 0.0, 0.0),) * 3


class Harmonic(_Strict):
    order: int = Field(ge=1)
    cos: list[tuple[int, int, int, float]] = []  # (psi power, phi_Q^2 power, phi_0 power, coefficient)
    sin: list[tuple[int, int, int, float]] = []


class NonSinusoidalModel(_Strict):
    type: Literal["nonsinusoidal"]
    base: Annotated[Union[PMSMModel, SaturatedModel], Field(discriminator="type")]
    harmonics: list[Harmonic]
    star_reduced: bool = False


ModelSection = Annotated[
    Union[PMSMModel, SynRMModel, SaturatedModel, IMModel, QuadraticModel, NonSinusoidalModel],
    Field(discriminator="type"),
]


class ConstantDqSource(_Strict):
    type: Literal["constant_dq"]
    v: Vec2  # V
    v0: float = 0.0
    omega_s: float = 0.0  # rad/s


class SineSource(_Strict):
    type: Literal["three_phase_sine"]
    amplitude: float  # V
    frequency: float  # Hz
    phase: float = 0.0  # rad


class InjectionSource(_Strict):
    type: Literal["injection"]
    low: Vec2 = (0.0, 0.0)
    high: Vec2 = (1.0, 0.0)
    carrier: Literal["square", "sine"] = "square"
    carrier_freq: float = Field(default=1000.0, gt=0)  # Hz


SourceSection = Annotated[Union[ConstantDqSource, SineSource, InjectionSource], Field(discriminator="type")]


class ConstantTorqueLoad(_Strict):
    type: Literal["constant_torque"]
    T_l: float = 0.0  # N m


class ViscousLoad(_Strict):
    type: Literal["viscous"]
    coefficient: float = Field(ge=0)  # N m s


LoadSection = Annotated[Union[ConstantTorqueLoad, ViscousLoad], Field(discriminator="type")]


class ResistanceSection(_Strict):
    Rs: float = Field(ge=0)  # Ohm
    Rr: float = Field(default=0.0, ge=0)


class InitialSection(_Strict):
    phi_s: Vec3 = (0.0, 0.0, 0.0)  # Wb, in the simulation frame
    phi_r: Vec3 = (0.0, 0.0, 0.0)
    theta: float = 0.0  # rad
    rho: Optional[float] = None  # kg m^2/s
    omega: Optional[float] = None  # rad/s, alternative to rho
    solve_constraint: bool = False  # fill constrained fluxes exactly

    @model_validator(mode="after")
    def _one_speed(self):
        if self.rho is not None and self.omega is not None:
            raise ValueError("give either rho or omega, not both")
        return self


class IntegrationSection(_Strict):
    dt: float = Field(default=1e-5, gt=0)  # s
    duration: float = Field(gt=0)  # s
    method: Literal["reduce", "multiplier"] = "reduce"
    prescribed_speed: bool = False


class OutputSection(_Strict):
    dir: str = "emhd_out"
    trajectory: str = "trajectory.csv"


class HarmonicCheck(_Strict):
    omega: float = Field(default=2 * math.pi * 50, gt=0)  # rad/s, electrical
    n_periods: int = Field(default=2, ge=1)
    settle: float = Field(default=0.3, ge=0)  # s
    steps_per_sixth: int = Field(default=100, ge=1)
    max_order: int = Field(default=24, ge=1)
    threshold: float = 1e-9


class CheckSection(_Strict):
    run: list[Literal["reciprocity", "symmetry", "energy", "harmonics", "frames"]] = [
        "reciprocity",
        "symmetry",
        "energy",
        "harmonics",
        "frames",
    ]
    n_points: int = Field(default=1000, ge=1)
    seed: int = 0
    harmonics: HarmonicCheck = HarmonicCheck()


class CurveSection(_Strict):
    d_range: Vec2 = (-0.2, 0.2)  # Wb, psi = phi_D - Phi_M
    q_range: Vec2 = (-0.2, 0.2)  # Wb
    n_points: int = Field(default=41, ge=2)


class SaliencySection(_Strict):
    phi: Vec2 = (0.155, 0.0)  # Wb, (phi_D, phi_Q)
    n_theta: int = Field(default=180, ge=2)
    v_high: Vec2 = (1.0, 0.0)  # V, injection amplitude for the virtual output


class FitSection(_Strict):
    samples: str  # CSV path, relative to the config file
    phi_m: Optional[float] = None  # Wb, defaults to the model's


class RunConfig(_Strict):
    model: ModelSection
    connection: ConnectionScheme = ConnectionScheme.UNCONNECTED
    frame: Optional[str] = None
    source: SourceSection = ConstantDqSource(type="constant_dq", v=(0.0, 0.0))
    load: LoadSection = ConstantTorqueLoad(type="constant_torque")
    resistances: ResistanceSection = ResistanceSection(Rs=0.0)
    initial: InitialSection = InitialSection()
    integration: IntegrationSection
    outputs: OutputSection = OutputSection()
    checks: CheckSection = CheckSection()
    curves: CurveSection = CurveSection()
    saliency: SaliencySection = SaliencySection()
    fit: Optional[FitSection] = None


def _line_of(node, loc) -> int | None:
    """1-based line of the YAML node addressed by a pydantic error location."""
    line = None
    for key in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                # discriminated-union tags and other synthetic keys
                continue
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            continue
    return line


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            where = ".".join(str(p) for p in loc)
            line = _line_of(root, loc)
            at = f" (line {line})" if line else ""
            msgs.append(f"{where}{at}: {err['msg']}")
        raise ConfigurationError(f"{source}: " + "; ".join(msgs)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def _mech(m: Mech) -> MechanicalParams:
    return MechanicalParams(J=m.J, n=m.n)


def _pmsm_params(m: PMSMModel) -> PMSMParams:
    g0 = m.gamma_0 if m.gamma_0 is not None else m.gamma_d
    return PMSMParams(m.gamma_d, m.gamma_q, g0, m.phi_m, _mech(m.mech))


def _saturated_params(m: SaturatedModel) -> SaturatedPMSMParams:
    return SaturatedPMSMParams(
        m.gamma_d, m.gamma_q, m.phi_m, m.phi1_d, m.phi2_d, m.phi1_q, m.phi1_x, m.phi2_x, _mech(m.mech), m.gamma_0
    )


def build_energy(model) -> EnergyFunction:
    """Energy function described by a model section (may raise ParameterError)."""
    if isinstance(model, PMSMModel):
        return build_pmsm(_pmsm_params(model))
    if isinstance(model, SynRMModel):
        g0 = model.gamma_0 if model.gamma_0 is not None else model.gamma_d
        return build_synrm(model.gamma_d, model.gamma_q, g0, _mech(model.mech))
    if isinstance(model, SaturatedModel):
        return build_saturated_pmsm(_saturated_params(model))
    if isinstance(model, IMModel):
        return build_im(
            IMParams(model.gamma_m, model.gamma_ls, model.gamma_lr, model.gamma_ls0, model.gamma_lr0, _mech(model.mech))
        )
    if isinstance(model, QuadraticModel):
        params = QuadraticEnergyParams(
            a=model.a, b=np.array(model.b), c=np.array(model.c),
            D=np.array(model.D), E=np.array(model.E), F=np.array(model.F),
        )
        return build_quadratic(params, _mech(model.mech), Frame.parse(model.frame))
    if isinstance(model, NonSinusoidalModel):
        base = _pmsm_params(model.base) if isinstance(model.base, PMSMModel) else _saturated_params(model.base)
        terms = [NonSinusoidalTerm(h.order, tuple(map(tuple, h.cos)), tuple(map(tuple, h.sin))) for h in model.harmonics]
        return build_nonsinusoidal_pmsm(base, terms, star_reduced=model.star_reduced)
    raise ConfigurationError(f"unsupported model section {type(model).__name__}")


def model_phi_m(model) -> float:
    if isinstance(model, NonSinusoidalModel):
        return model.base.phi_m
    return float(getattr(model, "phi_m", 0.0))


def build_source(src):
    if isinstance(src, ConstantDqSource):
        return ConstantDq(tuple(src.v), src.v0, src.omega_s)
    if isinstance(src, SineSource):
        return ThreePhaseSine(src.amplitude, src.frequency, src.phase)
    return Injection(tuple(src.low), tuple(src.high), src.carrier, src.carrier_freq)


def build_load(load):
    if isinstance(load, ConstantTorqueLoad):
        return ConstantTorque(load.T_l)
    return ViscousFriction(load.coefficient)


def build_scenario(cfg: RunConfig, energy: EnergyFunction | None = None) -> Scenario:
    """Scenario of a config; the initial state is given in the simulation frame."""
    from .sim import consistent_state

    H = energy if energy is not None else build_energy(cfg.model)
    frame = Frame.parse(cfg.frame) if cfg.frame is not None else Frame(H.frame)
    ini = cfg.initial
    x0 = np.zeros(8)
    x0[0:3] = ini.phi_s
    x0[3:6] = ini.phi_r
    x0[6] = ini.theta
    if ini.rho is not None:
        x0[7] = ini.rho
    elif ini.omega is not None:
        x0[7] = H.mech.J * ini.omega
    if ini.solve_constraint:
        x0 = consistent_state(H, x0, cfg.connection, frame=frame)
    integ = cfg.integration
    return Scenario(
        energy=H,
        initial=x0,
        duration=integ.duration,
        dt=integ.dt,
        scheme=cfg.connection,
        frame=frame,
        source=build_source(cfg.source),
        load=build_load(cfg.load),
        resistances=Resistances(cfg.resistances.Rs, cfg.resistances.Rr),
        method=integ.method,
        prescribed_speed=integ.prescribed_speed,
    )
