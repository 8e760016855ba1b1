"""Energy-based modeling and simulation of three-phase AC motors."""

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    EmhdError,
    IdentifiabilityError,
    NumericError,
    ParameterError,
    SymmetryViolationError,
    WindowingError,
)
from .frames import Frame, TriVector, convert

__version__ = "0.1.0"
