"""Exception types shared across the package."""


class PararegError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PararegError):
    pass


class IndeterminateSum(PararegError):
    """(+inf) + (-inf) has no extended-real value."""


class NumericalFailure(PararegError):
    """A solver exceeded its pivot/iteration budget."""


class EmptySet(PararegError):
    """The specified convex set is infeasible."""


class PointNotInSet(PararegError):
    pass


class NotANormal(PararegError):
    """Supplied vector is not in the normal cone at the base point."""


class NotTangent(PararegError):
    """Supplied direction is not in the tangent cone at the base point."""


class NotCritical(PararegError):
    """Supplied direction is not in the critical cone."""


class InfeasiblePoint(PararegError):
    pass


class EmptyMultiplierSet(PararegError):
    """No Lagrange multiplier exists; MSCQ violated or v not a normal."""


class RankDeficient(PararegError):
    """Reduction map jacobian does not have full row rank."""


class KktViolated(PararegError):
    pass


class NoMultipliers(PararegError):
    pass


class NonpositiveRho(PararegError):
    pass


class NonConvexUnsupported(PararegError):
    pass


class UnsupportedGeometry(PararegError):
    """A representable-but-unreachable corner the dense solvers cannot handle."""


class ParseError(PararegError):
    """Problem-file parsing failed; message carries location context."""
