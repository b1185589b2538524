"""Exception hierarchy shared by all qgeo modules."""


class QGeoError(Exception):
    """Base class for all qgeo errors."""


class ConfigError(QGeoError):
    """Malformed model, path or run configuration."""


class NumericalAbort(QGeoError):
    """Base class for errors that abort a numerical computation."""


class DegenerateLevel(NumericalAbort):
    pass


class NonHermitian(NumericalAbort):
    pass


class FrameMismatch(NumericalAbort):
    pass


class StepUnderflow(NumericalAbort):
    pass


class DomainError(NumericalAbort, ValueError):
    pass


class SingularQGT(NumericalAbort):
    pass


class StencilFailure(NumericalAbort):
    pass


class StepFailure(NumericalAbort):
    pass


class NotOrthogonal(NumericalAbort, ValueError):
    pass


class FitRejected(QGeoError):
    """Convergence fit is not in the asymptotic regime (r^2 too small)."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class IntegratorWarning(UserWarning):
    pass
