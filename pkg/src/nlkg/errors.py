"""Exception hierarchy.

Every failure the library can signal derives from :class:`NLKGError`; the CLI
maps :class:`ConfigError` to exit code 2 and any other :class:`NLKGError` to 3.
"""


class NLKGError(Exception):
    pass


class ConfigError(NLKGError, ValueError):
    pass


class GridError(NLKGError, ValueError):
    """Unusable discretization (too few points, empty domain, under-resolved)."""


class NumericalFailure(NLKGError):
    pass


class NoNegativeEigenvalue(NumericalFailure):
    pass


class NonConvergence(NumericalFailure):
    pass


class QuadratureUnderResolved(NumericalFailure):
    pass


class InconsistentSign(NumericalFailure):
    pass


class OutsideRegion(NLKGError, ValueError):
    pass


class Overflow(NumericalFailure):
    def __init__(self, message, amplitude=None):
        super().__init__(message)
        self.amplitude = amplitude


class BoundaryContact(NumericalFailure):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NoEjectionWindow(NumericalFailure):
    pass


class NoContraction(NumericalFailure):
    pass


class HorizonTooShort(NumericalFailure):
    pass


class BracketInvalid(NLKGError, ValueError):
    pass
