"""
Pydantic domain models for optimal Adams-type finite-difference formulas.

Real-valued fields hold mpmath numbers of the owning PrecisionContext, so the
models allow arbitrary types and are never serialized directly; see
``optimal_adams.schemas`` for the wire formats.
"""

from typing import Any, Callable, Literal, Optional

from mpmath import MPContext
from pydantic import BaseModel, ConfigDict, Field, model_validator

from optimal_adams.config import get_config
from optimal_adams.precision import context_for


class PrecisionContext(BaseModel):
    """Working precision shared by every computation on one formula."""

    model_config = ConfigDict(frozen=True)

    mantissa_bits: int = Field(
        default=256, ge=53, description="Mantissa bits of all real arithmetic"
    )
    quadrature_order: int = Field(
        default=6, ge=1, description="Gauss-Legendre degree for W-norm integrals"
    )

    @property
    def ctx(self) -> MPContext:
        """This thread's mpmath context at ``mantissa_bits``."""
        return context_for(self.mantissa_bits)


def resolve_precision(precision: Optional[PrecisionContext] = None) -> PrecisionContext:
    """Return ``precision`` or the configured default."""
    if precision is not None:
        return precision
    config = get_config()
    return PrecisionContext(
        mantissa_bits=config.precision.mantissa_bits,
        quadrature_order=config.precision.quadrature_order,
    )


class FormulaParams(BaseModel):
    """Smoothness order m, grid density N (h = 1/N) and step count k."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(..., description="Smoothness order of W2^(m,m-1)")
    N: int = Field(..., description="Grid density; h = 1/N")
    k: int = Field(..., description="Step count; nodes h*beta for beta = 0..k")

    @model_validator(mode="after")
    def _check_invariants(self) -> "FormulaParams":
        if self.m < 3:
            raise ValueError(f"m must be >= 3 (smoothness order), got m={self.m}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1 (h = 1/N), got N={self.N}")
        if self.k < 3:
            raise ValueError(
                f"k must be >= 3 (non-empty interior 1..k-2), got k={self.k}"
            )
        if self.k < self.m:
            raise ValueError(
                f"k must be >= m (under-determined constraints), "
                f"got k={self.k}, m={self.m}"
            )
        if self.k > self.N:
            raise ValueError(
                f"h*k <= 1 requires k <= N (nodes inside [0,1]), "
                f"got k={self.k}, N={self.N}"
            )
        return self

    def h(self, ctx: MPContext) -> Any:
        """Step length 1/N in ``ctx``."""
        return ctx.mpf(1) / self.N

    def node(self, beta: int, ctx: MPContext) -> Any:
        """Grid point h*beta, rounded once from the exact rational beta/N."""
        return ctx.mpf(beta) / self.N


class FdFormula(BaseModel):
    """Left coefficients C and derivative coefficients C1 on the grid h*beta."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: FormulaParams
    C: list[Any] = Field(..., description="Left coefficients C_beta, beta = 0..k")
    C1: list[Any] = Field(
        ..., description="Derivative coefficients C1_beta, beta = 0..k"
    )
    precision: PrecisionContext = Field(default_factory=PrecisionContext)

    @model_validator(mode="after")
    def _check_lengths(self) -> "FdFormula":
        size = self.params.k + 1
        if len(self.C) != size or len(self.C1) != size:
            raise ValueError(
                f"C and C1 must have exactly k+1 = {size} entries, "
                f"got {len(self.C)} and {len(self.C1)}"
            )
        return self

    def is_adams(self) -> bool:
        """True for Adams C (C_k = 1, C_{k-1} = -1, else 0) with C1_k = 0."""
        k = self.params.k
        expected = [0] * (k - 1) + [-1, 1]
        return all(c == e for c, e in zip(self.C, expected)) and self.C1[k] == 0


class AdamsSpec(BaseModel):
    """Explicit Adams-type problem: C from the Adams pattern, C1 supported on 0..k-1."""

    model_config = ConfigDict(frozen=True)

    params: FormulaParams

    @property
    def support(self) -> list[int]:
        return list(range(self.params.k))


class GenericSpec(BaseModel):
    """Arbitrary left coefficients with an explicit support for C1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: FormulaParams
    C: list[Any]
    support: Optional[list[int]] = Field(
        default=None, description="Indices where C1 may be non-zero; defaults to 0..k"
    )

    def resolved_support(self) -> list[int]:
        if self.support is None:
            return list(range(self.params.k + 1))
        return sorted(set(self.support))


class IntPolynomial(BaseModel):
    """Polynomial with exact integer coefficients, ascending degree."""

    model_config = ConfigDict(frozen=True)

    coefficients: list[int]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: Any) -> Any:
        result = 0 * x
        for c in reversed(self.coefficients):
            result = result * x + c
        return result


class SlaeSystem(BaseModel):
    """Square linear system for the optimal C1 and the multipliers."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: FormulaParams
    precision: PrecisionContext
    C: list[Any] = Field(..., description="Left coefficients the system was built for")
    support: list[int] = Field(..., description="Indices of C1 that are unknowns")
    matrix: Any = Field(..., description="mpmath matrix, n x n")
    rhs: list[Any]
    unknown_labels: list[str]

    @property
    def size(self) -> int:
        return len(self.rhs)


class OptimalFormula(BaseModel):
    """Solved optimal formula together with its multipliers and diagnostics."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    formula: FdFormula
    multipliers: list[Any] = Field(
        ...,
        description="Coefficients of P_{m-3} (ascending), then the exponential one",
    )
    support: list[int]
    residual_norm: Any = Field(..., description="Relative residual after refinement")
    condition_estimate: Any


class CharPolynomial(BaseModel):
    """Characteristic polynomial P_{2m-4} of the interior coefficient recurrence."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    m: int
    h: Any
    coefficients: list[Any] = Field(..., description="p_s, ascending degree")
    precision: PrecisionContext

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


class SpectralRep(BaseModel):
    """Roots inside the unit disk with fitted amplitudes and boundary coefficients."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: FormulaParams
    precision: PrecisionContext
    roots: list[Any]
    M: list[Any]
    N: list[Any]
    fit_residual: Any = Field(
        ..., description="Worst relative residual over interior nodes"
    )
    C0: Optional[Any] = None
    Ck1: Optional[Any] = None

    def interior(self, beta: int) -> Any:
        """sum_j M_j lambda_j^beta + N_j lambda_j^(k-beta)."""
        k = self.params.k
        total = self.precision.ctx.mpc(0)
        for lam, a, b in zip(self.roots, self.M, self.N):
            total += a * lam**beta + b * lam ** (k - beta)
        return total


class TestFunction(BaseModel):
    """Analytic test function with exact derivatives."""

    __test__ = False

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    value: Callable[[Any], Any]
    derivative: Callable[[Any], Any]
    nth_derivative: Optional[Callable[[int, Any], Any]] = Field(
        default=None, description="(n, x) -> n-th derivative; needed by w_norm_sq"
    )
    w_norm_hint: Optional[float] = Field(default=None, ge=0)


class IvpProblem(BaseModel):
    """Scalar initial value problem y' = f(x, y), y(0) = y0 on [0, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    rhs: Callable[[Any, Any], Any] = Field(
        ..., description="f(x, y); plain arithmetic so it accepts floats and mpf"
    )
    y0: float
    exact: Optional[Callable[[float], float]] = None
    exact_mp: Optional[Callable[[MPContext, Any], Any]] = None
    description: str = ""


class Trajectory(BaseModel):
    """Nodes, computed values and (when known) pointwise errors of one run."""

    method: str
    problem: str
    N: int
    x: list[float]
    y: list[float]
    error: Optional[list[float]] = None

    @property
    def max_error(self) -> Optional[float]:
        if self.error is None:
            return None
        return max(self.error)


class MethodSpec(BaseModel):
    """Marching method for the ODE benchmark."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["optimal", "adams-bashforth"]
    m: Optional[int] = None
    k: int = Field(..., ge=1, description="Step count of the formula")

    @property
    def label(self) -> str:
        if self.kind == "optimal":
            return f"optimal(m={self.m},k={self.k})"
        return f"adams-bashforth(k={self.k})"


class ConvergenceRow(BaseModel):
    N: int
    max_abs_error: float


class ConvergenceReport(BaseModel):
    """Per-N maximum errors with the least-squares order fit."""

    method: str
    problem: str
    rows: list[ConvergenceRow]
    fitted_order: Optional[float] = None
    exact: bool = Field(
        default=False,
        description="True when errors underflowed and no order was fitted",
    )


class CrossValidationReport(BaseModel):
    """Discrepancies between the direct solve and the root-based representation."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: FormulaParams
    roots: list[Any]
    palindromy_residual: Any
    fit_residual: Any
    imaginary_residual: Any
    conjugate_residual: Any = Field(
        default=None, description="Amplitude mismatch between conjugate roots"
    )
    C0_discrepancy: Any
    Ck1_discrepancy: Any
    sum_check: Any
    exp_check: Any
    max_discrepancy: Any
    passed: bool
    representation: Optional[SpectralRep] = Field(
        default=None, description="Fitted roots, amplitudes and boundary coefficients"
    )


class VerificationCheck(BaseModel):
    """One named check of a formula against its tolerance."""

    name: str
    value: str = Field(..., description="Measured quantity as a decimal string")
    tolerance: str
    passed: bool
    detail: str = ""


class VerificationReport(BaseModel):
    """All verification checks of one formula."""

    m: int
    N: int
    k: int
    precision_bits: int
    checks: list[VerificationCheck]

    @property
    def failed_checks(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]

    @property
    def passed(self) -> bool:
        return not self.failed_checks
