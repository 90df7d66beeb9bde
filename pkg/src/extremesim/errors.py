"""Exception hierarchy shared by the engine and the command-line tool."""


class ExtremeSimError(Exception):
    """Base class for all package errors."""


class DimensionError(ExtremeSimError, ValueError):
    """Operand shapes do not agree."""


class ContractError(ExtremeSimError, ValueError):
    """A cached object (tape, Gramian cache) does not match its inputs."""


class NumericError(ExtremeSimError, ArithmeticError):
    """A non-finite value appeared during evaluation."""

    def __init__(self, stage, message=None):
        self.stage = stage
        super().__init__(message or f"non-finite value encountered in {stage}")


class ConfigError(ExtremeSimError):
    """Invalid or unknown configuration."""


class DataError(ExtremeSimError):
    """Input data could not be read or failed validation."""


class ParseError(DataError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class ValidationError(DataError):
    pass


class LineSearchError(ExtremeSimError):
    """Backtracking exhausted its step budget without sufficient decrease."""


class NegativeCurvatureError(ExtremeSimError):
    """CG met a direction with d'Gd <= 0; ``s`` holds the iterate so far."""

    def __init__(self, s, iteration, curvature):
        self.s = s
        self.iteration = iteration
        self.curvature = curvature
        super().__init__(
            f"non-positive curvature {curvature:.3e} at CG iteration {iteration}"
        )


class SizeGuardError(ExtremeSimError):
    """Instance too large for the brute-force reference implementations."""


class CheckFailure(ExtremeSimError):
    """A numerical self-check exceeded its threshold."""
