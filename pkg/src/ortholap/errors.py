"""Exception hierarchy shared by all ortholap modules."""


class OrthoLapError(Exception):
    """Base class for every error raised by this package."""


# odmap
class DomainTooSmall(OrthoLapError):
    pass


class SpacingNonMonotone(OrthoLapError):
    pass


class MeshTooCoarse(OrthoLapError):
    pass


class FormatError(OrthoLapError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


# network
class InvalidMap(OrthoLapError):
    pass


class SideMismatch(OrthoLapError):
    pass


class NonConvergence(OrthoLapError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"solver stalled after {iterations} iterations (residual {residual:.3e})")


class NotHarmonic(OrthoLapError):
    pass


class InconsistentIntegration(OrthoLapError):
    pass


class NotAPath(OrthoLapError):
    pass


# walk
class IsolatedVertex(OrthoLapError):
    pass


class ExcessiveCaps(OrthoLapError):
    pass


class InsufficientExceedances(OrthoLapError):
    pass


class BallNotContained(OrthoLapError):
    pass


class GeometryViolation(OrthoLapError):
    pass


# continuum
class DegreeOutOfRange(OrthoLapError):
    pass


class TooCloseToBoundary(OrthoLapError):
    pass


class QuadratureFailure(OrthoLapError):
    pass


class BadOrdering(OrthoLapError):
    pass


class OutOfSampledRegion(OrthoLapError):
    pass


# mollify
class SquareNotContained(OrthoLapError):
    pass


# rates
class DomainError(OrthoLapError):
    pass


class CaseOutOfScope(OrthoLapError):
    pass


class BetaOutOfRange(OrthoLapError):
    pass


class MissingFields(OrthoLapError):
    pass


# harness
class OracleUnavailable(OrthoLapError):
    pass


class DegenerateFit(OrthoLapError):
    pass


class InvalidSpec(OrthoLapError, ValueError):
    pass


class ConfigError(OrthoLapError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class IoError(OrthoLapError, OSError):
    pass
