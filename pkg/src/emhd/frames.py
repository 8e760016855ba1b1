"""Clarke and rotation matrices, frame tags and frame conversions.

Stator and rotor vectors follow different rules:

========  ====================  ==================
frame     stator from alpha-beta-0   rotor from alpha-beta-0
========  ====================  ==================
dq0       R3(-theta_s)          R3(theta - theta_s)
DQ0       R3(-theta)            identity
========  ====================  ==================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FrameMismatchError

__all__ = [
    "Frame",
    "TriVector",
    "CLARKE",
    "J2",
    "J3",
    "clarke",
    "inverse_clarke",
    "rot2",
    "rot3",
    "rot2_matrix",
    "rot3_matrix",
    "rot3_generic",
    "convert",
    "convert_array",
    "wrap_angle",
    "axis_labels",
]


class Frame(str, enum.Enum):
    ABC = "abc"
    ALPHABETA0 = "alphabeta0"
    DQ0 = "dq0"  # rotates with theta_s (control voltage)
    ROTOR_DQ0 = "DQ0"  # rotates with the rotor angle theta

    @classmethod
    def parse(cls, text: str) -> "Frame":
        aliases = {
            "abc": cls.ABC,
            "alphabeta0": cls.ALPHABETA0,
            "ab0": cls.ALPHABETA0,
            "dq0": cls.DQ0,
            "DQ0": cls.ROTOR_DQ0,
        }
        try:
            return aliases[text]
        except KeyError:
            raise ConfigurationError(
                f"unknown frame {text!r}; expected one of {sorted(aliases)}"
            ) from None

    @property
    def needs_theta(self) -> bool:
        return self in (Frame.ROTOR_DQ0, Frame.DQ0)

    @property
    def needs_theta_s(self) -> bool:
        return self is Frame.DQ0


_AXES = {
    Frame.ABC: ("a", "b", "c"),
    Frame.ALPHABETA0: ("alpha", "beta", "0"),
    Frame.DQ0: ("d", "q", "0"),
    Frame.ROTOR_DQ0: ("D", "Q", "0"),
}


def axis_labels(frame: Frame) -> tuple[str, str, str]:
    return _AXES[Frame(frame)]


_S2 = math.sqrt(2.0)
_S3 = math.sqrt(3.0)

CLARKE = math.sqrt(2.0 / 3.0) * np.array(
    [
        [1.0, -0.5, -0.5],
        [0.0, _S3 / 2.0, -_S3 / 2.0],
        [_S2 / 2.0, _S2 / 2.0, _S2 / 2.0],
    ]
)
CLARKE.setflags(write=False)

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
J3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
J2.setflags(write=False)
J3.setflags(write=False)


def wrap_angle(angle: float) -> float:
    """Canonical representative of ``angle`` in [0, 2*pi)."""
    wrapped = math.fmod(angle, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    return 0.0 if wrapped >= 2.0 * math.pi else wrapped


def rot2_matrix(eta: float) -> np.ndarray:
    c, s = math.cos(eta), math.sin(eta)
    return np.array([[c, -s], [s, c]])


def rot3_matrix(eta: float) -> np.ndarray:
    c, s = math.cos(eta), math.sin(eta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class TriVector:
    """Three coordinates tagged with the frame they are expressed in."""

    values: np.ndarray
    frame: Frame

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(3)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite TriVector components {arr}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "frame", Frame(self.frame))

    def _check(self, other: "TriVector") -> None:
        if not isinstance(other, TriVector):
            raise TypeError("TriVector arithmetic needs another TriVector")
        if other.frame is not self.frame:
            raise FrameMismatchError(
                f"cannot combine {self.frame.value} and {other.frame.value} vectors"
            )

    def __add__(self, other: "TriVector") -> "TriVector":
        self._check(other)
        return TriVector(self.values + other.values, self.frame)

    def __sub__(self, other: "TriVector") -> "TriVector":
        self._check(other)
        return TriVector(self.values - other.values, self.frame)

    def __mul__(self, scalar: float) -> "TriVector":
        return TriVector(self.values * float(scalar), self.frame)

    __rmul__ = __mul__

    def __neg__(self) -> "TriVector":
        return TriVector(-self.values, self.frame)

    def dot(self, other: "TriVector") -> float:
        self._check(other)
        return float(self.values @ other.values)

    def __iter__(self):
        return iter(self.values.tolist())

    def __getitem__(self, k):
        return self.values[k]


def _expect(v: TriVector, frame: Frame) -> None:
    if not isinstance(v, TriVector):
        raise TypeError(f"expected a TriVector, got {type(v).__name__}")
    if v.frame is not frame:
        raise FrameMismatchError(f"expected a {frame.value} vector, got {v.frame.value}")


def clarke(v: TriVector) -> TriVector:
    _expect(v, Frame.ABC)
    return TriVector(CLARKE @ v.values, Frame.ALPHABETA0)


def inverse_clarke(v: TriVector) -> TriVector:
    _expect(v, Frame.ALPHABETA0)
    return TriVector(CLARKE.T @ v.values, Frame.ABC)


def rot2(eta: float, v) -> np.ndarray:
    return rot2_matrix(eta) @ np.asarray(v, dtype=float).reshape(2)


def rot3(eta: float, v):
    """Rotate about the 0-axis; the third component is left unchanged."""
    if isinstance(v, TriVector):
        return TriVector(rot3_matrix(eta) @ v.values, v.frame)
    return rot3_matrix(eta) @ np.asarray(v, dtype=float).reshape(3)


def rot3_generic(c, s, v):
    """R3 applied with precomputed cos/sin; works on any scalar type.

    Used inside energy functions, where components may be dual numbers or
    trace nodes rather than floats.
    """
    x, y, z = v
    return (c * x - s * y, s * x + c * y, z)


def _stator_angle(frame: Frame, theta, theta_s) -> float:
    # angle eta such that x_frame = R3(-eta) x_ab0
    if frame is Frame.ROTOR_DQ0:
        return theta
    if frame is Frame.DQ0:
        return theta_s
    return 0.0


def _rotor_angle(frame: Frame, theta, theta_s) -> float:
    if frame is Frame.DQ0:
        return theta_s - theta
    return 0.0


def _require_angles(frame: Frame, theta, theta_s) -> None:
    if frame.needs_theta and theta is None and frame is Frame.ROTOR_DQ0:
        raise ConfigurationError("conversion to/from DQ0 needs theta")
    if frame is Frame.DQ0 and (theta_s is None):
        raise ConfigurationError("conversion to/from dq0 needs theta_s")


def convert_array(
    values,
    source: Frame,
    target: Frame,
    theta: float | None = None,
    theta_s: float | None = None,
    kind: str = "stator",
) -> np.ndarray:
    """Array version of :func:`convert` (no frame tags)."""
    source, target = Frame(source), Frame(target)
    if kind not in ("stator", "rotor"):
        raise ConfigurationError(f"kind must be 'stator' or 'rotor', got {kind!r}")
    x = np.asarray(values, dtype=float).reshape(3)
    if source is target:
        return x.copy()
    _require_angles(source, theta, theta_s)
    _require_angles(target, theta, theta_s)
    if kind == "rotor" and Frame.DQ0 in (source, target) and theta is None:
        raise ConfigurationError("rotor conversion to/from dq0 needs theta")
    angle = _stator_angle if kind == "stator" else _rotor_angle

    if source is Frame.ABC:
        hub = CLARKE @ x
    elif source is Frame.ALPHABETA0:
        hub = x
    else:
        hub = rot3_matrix(angle(source, theta, theta_s)) @ x
    if target is Frame.ABC:
        return CLARKE.T @ hub
    if target is Frame.ALPHABETA0:
        return hub
    return rot3_matrix(-angle(target, theta, theta_s)) @ hub


def convert(
    v: TriVector,
    to: Frame,
    theta: float | None = None,
    theta_s: float | None = None,
    kind: str = "stator",
) -> TriVector:
    """Express ``v`` in frame ``to``.

    ``kind`` selects the stator rule or the rotor rule for rotating frames.
    Missing angles raise :class:`ConfigurationError`.
    """
    if not isinstance(v, TriVector):
        raise TypeError("convert expects a TriVector")
    to = Frame(to)
    return TriVector(convert_array(v.values, v.frame, to, theta, theta_s, kind), to)
