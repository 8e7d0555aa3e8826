"""Exception hierarchy. Every error raised on purpose by the library derives from SingwishError."""


class SingwishError(Exception):
    """Base class for library errors."""


class NotSymmetric(SingwishError, ValueError):
    pass


class NotPositiveSemiDefinite(SingwishError, ValueError):
    pass


class RankZero(SingwishError, ValueError):
    pass


class DowndateNotPSD(SingwishError, ValueError):
    pass


class ZeroProjection(SingwishError, ValueError):
    pass


class DegenerateDirection(SingwishError, ValueError):
    pass


class DegenerateProjection(SingwishError, ValueError):
    pass


class ZeroConcentration(SingwishError, ValueError):
    pass


class SpecViolation(SingwishError, ValueError):
    pass


class DimensionGuard(SingwishError, ValueError):
    pass


class ConfigError(SingwishError, ValueError):
    pass


class DomainError(SingwishError, ValueError):
    pass


class EmptySample(SingwishError, ValueError):
    pass


class DegenerateSample(SingwishError, ValueError):
    pass


class NumericalBreakdown(SingwishError, ArithmeticError):
    pass


class QuadratureNonConvergence(SingwishError, ArithmeticError):
    pass


class IllConditioned(SingwishError, ArithmeticError):
    def __init__(self, message, zeta=None):
        super().__init__(message)
        self.zeta = zeta
