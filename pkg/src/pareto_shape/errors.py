"""Exception types raised across the pipeline."""


class ParetoShapeError(Exception):
    """Base class for all package errors."""


class ConfigError(ParetoShapeError, ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        loc = []
        if field is not None:
            loc.append(f"field '{field}'")
        if line is not None:
            loc.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)


class NormBoundViolation(ParetoShapeError):
    pass


class SelfIntersection(ParetoShapeError):
    pass


class EmptySet(ParetoShapeError, ValueError):
    pass


class GridTooCoarse(ParetoShapeError, ValueError):
    pass


class MeshFailure(ParetoShapeError):
    pass


class IncompatibleData(ParetoShapeError):
    pass


class SingularSystem(ParetoShapeError):
    pass


class MissingClamp(ParetoShapeError):
    pass


class NonConvergence(ParetoShapeError):
    pass


class LengthMismatch(ParetoShapeError, ValueError):
    pass


class EmptyPool(ParetoShapeError, ValueError):
    pass


class InfeasibleProblem(ParetoShapeError):
    pass
