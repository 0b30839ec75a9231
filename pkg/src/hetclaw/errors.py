"""Exception hierarchy shared by every module."""


class HetclawError(Exception):
    """Base class for all errors raised by the package."""


class FluxError(HetclawError, ValueError):
    """A flux family was requested with parameters outside its valid range."""


class DegenerateJump(HetclawError):
    """Left and right states are too close for a Rankine-Hugoniot quotient."""


class NewtonDivergence(HetclawError):
    """Safeguarded Newton iteration failed to converge."""


class CflViolation(HetclawError):
    """The computed time step is not positive."""


class NonFiniteState(HetclawError):
    """A NaN or infinity appeared in the state."""


class OutOfDomain(HetclawError):
    """A query point or trajectory left the computational grid."""


class LostShock(HetclawError):
    """A tracked discontinuity dropped below the jump floor."""


class NotEmerged(HetclawError):
    """No simple shock was detected within the simulated horizon.

    The partially filled report is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NoIntersection(HetclawError):
    """Two shock curves never come within the merge tolerance."""


class OrderingViolation(HetclawError):
    """The shift curves lost their ordering xi_plus <= xi_minus."""


class ShockFormedEarly(HetclawError):
    """A shock appeared before the growth window could be measured."""


class ConeTooNarrow(HetclawError):
    """The dynamic-programming minimiser sits on the edge of its bracket."""


class GridMismatch(HetclawError):
    """Two objects that must share a grid (and time) do not."""


class ConfigError(HetclawError):
    """Invalid run configuration; ``problems`` maps field names to messages."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = dict(problems or {})
