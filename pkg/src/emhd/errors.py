"""Exception hierarchy shared by all emhd modules."""


class EmhdError(Exception):
    """Base class for every error raised by emhd."""


class ConfigurationError(EmhdError):
    """Inconsistent frame, scheme, missing angle or bad config document."""


class FrameMismatchError(ConfigurationError):
    """Operation applied to a vector tagged with the wrong frame."""


class ParameterError(EmhdError):
    """Model parameters violate their invariants."""


class SymmetryViolationError(ParameterError):
    """Energy term incompatible with a geometric symmetry of the machine."""


class NumericError(EmhdError):
    """Base class for failures of a numerical procedure."""


class EvaluationError(NumericError):
    """Energy evaluation produced a non-finite value or derivative."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class DegeneracyError(NumericError):
    """A Hessian block that must be invertible is singular."""


class ConvergenceError(NumericError):
    """An iterative solver did not converge."""


class DivergenceError(NumericError):
    """Integration produced non-finite state derivatives."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class WindowingError(NumericError):
    """Signal does not cover an integer number of fundamental periods."""


class IdentifiabilityError(NumericError):
    """Least-squares Jacobian is rank deficient."""

    def __init__(self, message, directions=None):
        super().__init__(message)
        self.directions = directions if directions is not None else []
