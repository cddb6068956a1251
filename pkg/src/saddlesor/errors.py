"""Exception hierarchy shared across the package."""


class SaddleError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SaddleError, ValueError):
    pass


class NotSquare(SaddleError, ValueError):
    pass


class NotSpd(SaddleError):
    """A nonpositive pivot appeared during a Cholesky factorization."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class Asymmetric(SaddleError):
    pass


class OracleCapExceeded(SaddleError):
    """A dense oracle was requested above the configured dimension cap."""


class NoConvergence(SaddleError):
    pass


class SingularPreconditioner(SaddleError):
    pass


class ParamViolation(SaddleError, ValueError):
    """Parameters break a nonsingularity or tie constraint of their method."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DegenerateA(SaddleError, ValueError):
    pass


class DegenerateOmega2(SaddleError, ValueError):
    pass


class Infeasible(SaddleError, ValueError):
    pass


class RegionNotCoded(SaddleError):
    pass


class ConfigError(SaddleError, ValueError):
    pass
