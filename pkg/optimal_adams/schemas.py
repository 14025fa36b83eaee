"""
JSON payload schemas and converters.

Every multiprecision value crosses the JSON boundary as a decimal string with
enough digits to parse back to the same value at the stored precision.
"""

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from optimal_adams.direct_solver import (
    babuska_max_residual,
    explicit_support,
    fit_multipliers,
)
from optimal_adams.models import (
    ConvergenceReport,
    CrossValidationReport,
    FdFormula,
    FormulaParams,
    OptimalFormula,
    PrecisionContext,
    Trajectory,
    VerificationReport,
)
from optimal_adams.precision import (
    complex_parts,
    context_for,
    from_decimal_string,
    to_decimal_string,
)


class ParamsPayload(BaseModel):
    m: int
    N: int
    k: int


class ComplexValue(BaseModel):
    """Complex number as a pair of decimal strings."""

    re: str
    im: str


class SolverDiagnostics(BaseModel):
    """Diagnostics emitted alongside solved coefficients."""

    condition_estimate: str
    residual_norm: str
    babuska_max_residual: str


class FdFormulaPayload(BaseModel):
    """Interchange format of a finite-difference formula."""

    m: int
    N: int
    k: int
    precision_bits: int = Field(
        ..., ge=53, description="Precision the values were computed at"
    )
    C: list[str] = Field(..., description="Left coefficients, beta = 0..k")
    C1: list[str] = Field(..., description="Derivative coefficients, beta = 0..k")
    multipliers: Optional[list[str]] = Field(
        default=None, description="p_0..p_(m-3) then lambda, when known"
    )
    diagnostics: Optional[SolverDiagnostics] = None


class SpectralPayload(BaseModel):
    """Root-based representation of the interior coefficients."""

    model_config = ConfigDict(populate_by_name=True)

    params: ParamsPayload
    precision_bits: int
    lambda_: list[ComplexValue] = Field(..., alias="lambda")
    M: list[ComplexValue]
    N: list[ComplexValue]
    C0: str
    Ck1: str
    fit_residual: str
    C0_discrepancy: str
    Ck1_discrepancy: str
    palindromy_residual: str
    passed: bool


class TrajectoryPayload(BaseModel):
    trajectory: Trajectory
    max_error: Optional[float] = None
    startup: str


class ConvergencePayload(BaseModel):
    problem: str
    startup: str
    N_list: list[int]
    reports: list[ConvergenceReport]


def formula_to_payload(
    opt: OptimalFormula, diagnostics: bool = True
) -> FdFormulaPayload:
    """
    Serialize a solved formula.

    Args:
        opt: Solved formula
        diagnostics: Also compute and attach solver diagnostics

    Returns:
        FdFormulaPayload with decimal-string values
    """
    formula = opt.formula
    ctx = formula.precision.ctx
    params = formula.params
    diag = None
    if diagnostics:
        diag = SolverDiagnostics(
            condition_estimate=to_decimal_string(opt.condition_estimate, ctx),
            residual_norm=to_decimal_string(opt.residual_norm, ctx),
            babuska_max_residual=to_decimal_string(babuska_max_residual(opt), ctx),
        )
    return FdFormulaPayload(
        m=params.m,
        N=params.N,
        k=params.k,
        precision_bits=formula.precision.mantissa_bits,
        C=[to_decimal_string(c, ctx) for c in formula.C],
        C1=[to_decimal_string(c, ctx) for c in formula.C1],
        multipliers=[to_decimal_string(v, ctx) for v in opt.multipliers],
        diagnostics=diag,
    )


def payload_to_formula(
    payload: FdFormulaPayload, precision: Optional[PrecisionContext] = None
) -> FdFormula:
    """
    Parse a payload back into a formula.

    Args:
        payload: Decoded JSON
        precision: Override of the stored precision

    Raises:
        pydantic.ValidationError: If the parameters or lengths are invalid
    """
    precision = precision or PrecisionContext(mantissa_bits=payload.precision_bits)
    ctx = precision.ctx
    params = FormulaParams(m=payload.m, N=payload.N, k=payload.k)
    return FdFormula(
        params=params,
        C=[from_decimal_string(c, ctx) for c in payload.C],
        C1=[from_decimal_string(c, ctx) for c in payload.C1],
        precision=precision,
    )


def payload_to_optimal(
    payload: FdFormulaPayload, precision: Optional[PrecisionContext] = None
) -> OptimalFormula:
    """Parse a payload with its multipliers, fitting them when they were not stored."""
    formula = payload_to_formula(payload, precision)
    ctx = formula.precision.ctx
    if payload.multipliers is None:
        return fit_multipliers(formula)
    if len(payload.multipliers) != payload.m - 1:
        raise ValueError(
            f"Expected {payload.m - 1} multipliers for m={payload.m}, "
            f"got {len(payload.multipliers)}"
        )
    return OptimalFormula(
        formula=formula,
        multipliers=[from_decimal_string(v, ctx) for v in payload.multipliers],
        support=explicit_support(formula),
        residual_norm=ctx.nan,
        condition_estimate=ctx.nan,
    )


def _complex(value: Any, ctx: Any) -> ComplexValue:
    re, im = complex_parts(value, ctx)
    return ComplexValue(re=re, im=im)


def spectral_to_payload(report: CrossValidationReport) -> SpectralPayload:
    """Serialize the representation carried by a cross-validation report."""
    rep = report.representation
    if rep is None:
        raise ValueError("Cross-validation report carries no representation")
    ctx = context_for(rep.precision.mantissa_bits)
    params = report.params
    return SpectralPayload(
        params=ParamsPayload(m=params.m, N=params.N, k=params.k),
        precision_bits=rep.precision.mantissa_bits,
        lambda_=[_complex(lam, ctx) for lam in rep.roots],
        M=[_complex(v, ctx) for v in rep.M],
        N=[_complex(v, ctx) for v in rep.N],
        C0=to_decimal_string(rep.C0, ctx),
        Ck1=to_decimal_string(rep.Ck1, ctx),
        fit_residual=to_decimal_string(rep.fit_residual, ctx),
        C0_discrepancy=to_decimal_string(report.C0_discrepancy, ctx),
        Ck1_discrepancy=to_decimal_string(report.Ck1_discrepancy, ctx),
        palindromy_residual=to_decimal_string(report.palindromy_residual, ctx),
        passed=report.passed,
    )


def verification_to_json(report: VerificationReport) -> dict[str, Any]:
    """Verification report with its derived pass/fail fields."""
    data = report.model_dump()
    data["passed"] = report.passed
    data["failed_checks"] = report.failed_checks
    return data
