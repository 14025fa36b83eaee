"""
Exceptions raised by the optimal Adams formula toolkit.
"""

from typing import Any, Optional, Sequence


class OptimalAdamsError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class AdmissibilityError(OptimalAdamsError):
    """Exception raised when a formula violates the exactness constraints."""

    def __init__(self, message: str, residuals: Sequence[Any], tolerance: float):
        """
        Initialize admissibility error.

        Args:
            message: Error message
            residuals: Relative constraint residuals that were checked
            tolerance: Tolerance the residuals had to meet
        """
        self.residuals = list(residuals)
        self.tolerance = tolerance
        super().__init__(message)


class NonConvergence(OptimalAdamsError):
    """Exception raised when quadrature refinement stalls."""

    def __init__(self, message: str, last_values: Sequence[Any]):
        self.last_values = list(last_values)
        super().__init__(message)


class DimensionError(OptimalAdamsError):
    """Exception raised when the support is too small for the constraint rows."""

    def __init__(self, message: str, support_size: int, required: int):
        self.support_size = support_size
        self.required = required
        super().__init__(message)


class SingularSystem(OptimalAdamsError):
    """Exception raised when elimination hits a pivot below working precision."""

    def __init__(self, message: str, size: int):
        self.size = size
        super().__init__(message)


class RootOnCircle(OptimalAdamsError):
    """Exception raised when a characteristic root sits on the unit circle."""

    def __init__(self, message: str, root: Any):
        self.root = root
        super().__init__(message)


class FitFailure(OptimalAdamsError):
    """Exception raised when the root representation misses the coefficients."""

    def __init__(
        self,
        message: str,
        residual: Optional[Any] = None,
        tolerance: Optional[float] = None,
    ):
        """
        Initialize fit failure.

        Args:
            message: Error message
            residual: Worst relative reconstruction residual, if one was computed
            tolerance: Tolerance the residual had to meet
        """
        self.residual = residual
        self.tolerance = tolerance
        if residual is not None:
            message = (
                f"{message} (first suspect: the Euler-Frobenius convention used "
                f"for the characteristic polynomial, then the root set)"
            )
        super().__init__(message)


class SpectralPrecondition(FitFailure):
    """Exception raised when there are too few interior nodes to fit the amplitudes."""

    def __init__(self, message: str, interior_nodes: int, required: int):
        self.interior_nodes = interior_nodes
        self.required = required
        super().__init__(message)


class StartupUnavailable(OptimalAdamsError):
    """Exception raised when exact startup is requested without an exact solution."""

    def __init__(self, message: str, problem: str):
        self.problem = problem
        super().__init__(message)


class UnknownProblem(OptimalAdamsError):
    """Exception raised for a name outside the built-in problem corpus."""

    def __init__(self, message: str, name: str):
        self.name = name
        super().__init__(message)


class DegenerateFit(OptimalAdamsError):
    """Exception raised when errors underflow and no order can be fitted."""

    def __init__(self, message: str, report: Any):
        """
        Initialize degenerate fit.

        Args:
            message: Error message
            report: ConvergenceReport with the per-N errors, marked exact
        """
        self.report = report
        super().__init__(message)
