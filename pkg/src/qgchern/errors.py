"""Exception types shared across the package."""


class QGError(Exception):
    """Base class for all package errors."""


class ValidationError(QGError, ValueError):
    """Bad user input: malformed config, unknown key, inconsistent scan axes."""


class NonUnitary(QGError):
    """A matrix expected to be unitary failed the unitarity check."""


class NoConvergence(QGError):
    """An iterative routine hit its iteration cap or could not stabilise."""


class SingularReduction(QGError):
    """The one-loop reduction is singular at the requested point."""


class GapClosure(QGError):
    """Two bands touch on the flux grid, so the Chern numbers are undefined."""


class TangentEllipses(QGError):
    """The two pole ellipses touch instead of crossing transversally."""


class DegenerateEllipse(QGError):
    """An ellipse coefficient product vanishes and the triangle data is undefined."""


class DegenerateJacobian(QGError):
    """A preimage Jacobian is too small to give a reliable sign."""


class SingularJacobian(QGError):
    """The field Jacobian at a crossing is singular."""


class AssumptionViolated(QGError):
    """The energy-derivative dominance assumption fails at a crossing."""


class Inconsistent(QGError):
    """Two independent closed-form routes disagree."""


class ComplexInput(QGError):
    """A real scattering matrix was required but the input has complex entries."""
