"""Exception hierarchy shared by all ndar modules."""


class NdarError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(NdarError, ValueError):
    """Invalid argument or malformed parameter set."""


class ShapeError(NdarError, ValueError):
    """Array dimensions do not line up (network size, presample depth, ...)."""


class SimulationDiverged(NdarError):
    """The simulated process left the finite range.

    Attributes
    ----------
    t : int
        Index of the offending step, counted from the first generated row
        (burn-in included).
    """

    def __init__(self, t: int, message: str | None = None):
        self.t = t
        super().__init__(message or f"simulation diverged at step t={t}")


class DomainError(NdarError, ValueError):
    """Conditional variance h_it is not strictly positive."""


class SingularInformationError(NdarError):
    """Information matrix is numerically singular."""


class DegenerateInferenceError(NdarError):
    """A standard error is zero, so the Wald statistic is undefined."""


class SelectionError(NdarError):
    """No grid cell produced a usable fit."""


class StudyError(NdarError):
    """Too many Monte Carlo replications failed."""


class SchemaError(NdarError, ValueError):
    """An input file does not conform to its declared format."""
