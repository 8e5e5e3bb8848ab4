"""Error types raised by the MVAG integration library."""

from typing import Optional


class MvagError(Exception):
    """Base class for every error the library raises on purpose."""


class InvalidParameter(MvagError, ValueError):
    pass


class DimensionMismatch(MvagError):
    pass


class InsufficientSpectrum(MvagError):
    pass


class NoConvergence(MvagError):
    def __init__(self, iterations: int, worst_residual: float):
        self.iterations = iterations
        self.worst_residual = worst_residual
        super().__init__(
            f"eigensolver did not converge after {iterations} matvecs "
            f"(worst residual {worst_residual:.3e})"
        )


class TooManyViews(MvagError):
    pass


class InfeasibleStart(MvagError):
    pass


class BudgetExhausted(MvagError):
    def __init__(self, evaluations: int):
        self.evaluations = evaluations
        super().__init__(f"evaluation budget exhausted after {evaluations} evaluations")


class SingularSystem(MvagError):
    pass


class LengthMismatch(MvagError):
    pass


class ZeroVolume(MvagError):
    pass


class TooLarge(MvagError):
    pass


class EmptyGraph(MvagError):
    pass


class ParseError(MvagError):
    def __init__(self, file: str, line: Optional[int], message: str):
        self.file = file
        self.line = line
        where = f"{file}:{line}" if line is not None else file
        super().__init__(f"{where}: {message}")


class AsymmetryBeyondTolerance(MvagError):
    pass
