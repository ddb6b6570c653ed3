"""Exception hierarchy shared by all modules."""


class QLEError(Exception):
    """Base class for every error raised by the package."""


class BandLimitError(QLEError):
    """A field carries spectral content the grid cannot resolve."""


class KernelObstruction(QLEError):
    """Right-hand side has l = 0 or l = 1 content, outside the range of 1/2 L(L+2)."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MalformedInput(QLEError):
    """Input arrays have the wrong shape or an unreadable layout."""


class ConstraintViolation(QLEError):
    """A named algebraic or differential constraint is violated."""

    def __init__(self, constraint, residual, report=None):
        super().__init__(f"{constraint}: residual {residual:.3e}")
        self.constraint = constraint
        self.residual = residual
        self.report = report


class MissingJetOrder(QLEError):
    """A derivative field was requested but the jet lacks its source array."""


class RecursionBreakdown(QLEError):
    """A series inversion hit a singular leading coefficient."""


class SignCalibrationFailure(QLEError):
    """Neither orientation of alpha_H reproduces the reference divergence."""


class ModeMismatch(QLEError):
    """Operation needs matter data (or vacuum data) that the jet does not provide."""


class NotTimelike(QLEError):
    """The dual vector of T(e0, .) is null or spacelike."""


class InfimumNotAttained(QLEError):
    """The vector U is not timelike, so the limiting energy has no unique minimizer."""

    def __init__(self, message, u_vector=None):
        super().__init__(message)
        self.u_vector = u_vector
