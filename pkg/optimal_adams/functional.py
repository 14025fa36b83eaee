"""
Error functional of a finite-difference formula and its norm in W2^(m,m-1).

    l(phi) = sum_beta C_beta phi(h beta) - h sum_beta C1_beta phi'(h beta)

The formula is admissible when l vanishes on 1, x, ..., x^(m-2) and e^(-x);
only then does the closed-form norm apply.
"""

import logging
from typing import Any, Optional

from optimal_adams.config import get_config
from optimal_adams.errors import AdmissibilityError, NonConvergence
from optimal_adams.kernel import green_g, green_g1, green_g2
from optimal_adams.models import (
    FdFormula,
    PrecisionContext,
    TestFunction,
    resolve_precision,
)

logger = logging.getLogger(__name__)


# --- analytic test functions -------------------------------------------------


def monomial(p: int, precision: Optional[PrecisionContext] = None) -> TestFunction:
    """x^p with exact derivatives."""
    ctx = resolve_precision(precision).ctx

    def nth(n: int, x: Any) -> Any:
        if n > p:
            return ctx.zero
        power = p - n
        factor = ctx.mpf(ctx.factorial(p) / ctx.factorial(power))
        return factor if power == 0 else factor * ctx.mpf(x) ** power

    return TestFunction(
        name=f"x^{p}",
        value=lambda x: nth(0, x),
        derivative=lambda x: nth(1, x),
        nth_derivative=nth,
    )


def exponential(a: Any, precision: Optional[PrecisionContext] = None) -> TestFunction:
    """e^(a x)."""
    ctx = resolve_precision(precision).ctx
    a = ctx.mpf(a)

    def nth(n: int, x: Any) -> Any:
        return a**n * ctx.exp(a * x)

    return TestFunction(
        name=f"exp({ctx.nstr(a, 6)}x)",
        value=lambda x: nth(0, x),
        derivative=lambda x: nth(1, x),
        nth_derivative=nth,
    )


def sine(a: Any, precision: Optional[PrecisionContext] = None) -> TestFunction:
    """sin(a x)."""
    ctx = resolve_precision(precision).ctx
    a = ctx.mpf(a)

    def nth(n: int, x: Any) -> Any:
        return a**n * ctx.sin(a * x + n * ctx.pi / 2)

    return TestFunction(
        name=f"sin({ctx.nstr(a, 6)}x)",
        value=lambda x: ctx.sin(a * x),
        derivative=lambda x: a * ctx.cos(a * x),
        nth_derivative=nth,
    )


def cosine(a: Any, precision: Optional[PrecisionContext] = None) -> TestFunction:
    """cos(a x)."""
    ctx = resolve_precision(precision).ctx
    a = ctx.mpf(a)

    def nth(n: int, x: Any) -> Any:
        return a**n * ctx.cos(a * x + n * ctx.pi / 2)

    return TestFunction(
        name=f"cos({ctx.nstr(a, 6)}x)",
        value=lambda x: ctx.cos(a * x),
        derivative=lambda x: -a * ctx.sin(a * x),
        nth_derivative=nth,
    )


def reciprocal(c: Any, precision: Optional[PrecisionContext] = None) -> TestFunction:
    """1/(x + c) for c > 0."""
    ctx = resolve_precision(precision).ctx
    c = ctx.mpf(c)
    if c <= 0:
        raise ValueError(f"reciprocal shift must be positive, got {c}")

    def nth(n: int, x: Any) -> Any:
        return (-1) ** n * ctx.factorial(n) / (x + c) ** (n + 1)

    return TestFunction(
        name=f"1/(x+{ctx.nstr(c, 6)})",
        value=lambda x: nth(0, x),
        derivative=lambda x: nth(1, x),
        nth_derivative=nth,
    )


def kernel_basis(
    m: int, precision: Optional[PrecisionContext] = None
) -> list[TestFunction]:
    """1, x, ..., x^(m-2) and e^(-x), which an admissible formula annihilates."""
    basis = [monomial(alpha, precision) for alpha in range(m - 1)]
    basis.append(exponential(-1, precision))
    return basis


# --- error functional --------------------------------------------------------


def apply_functional(f: FdFormula, phi: TestFunction) -> Any:
    """
    Evaluate l(phi) = sum C_beta phi(h beta) - h sum C1_beta phi'(h beta).

    Args:
        f: Finite-difference formula
        phi: Test function with analytic derivative

    Returns:
        l(phi) in the formula's precision
    """
    ctx = f.precision.ctx
    h = f.params.h(ctx)
    values = ctx.zero
    derivatives = ctx.zero
    for beta in range(f.params.k + 1):
        x = f.params.node(beta, ctx)
        if f.C[beta] != 0:
            values += f.C[beta] * phi.value(x)
        if f.C1[beta] != 0:
            derivatives += f.C1[beta] * phi.derivative(x)
    return values - h * derivatives


def constraint_residuals(f: FdFormula) -> list[Any]:
    """
    Residuals [l(1), l(x), ..., l(x^(m-2)), l(e^(-x))].

    All of them vanish exactly when the formula is admissible for W2^(m,m-1).
    """
    return [apply_functional(f, phi) for phi in kernel_basis(f.params.m, f.precision)]


def constraint_scales(f: FdFormula) -> list[Any]:
    """
    Magnitude of the terms summed in each constraint residual.

    sum |C_beta phi(h beta)| + h sum |C1_beta phi'(h beta)|, used to make the
    residuals relative. Zero only for the zero formula.
    """
    ctx = f.precision.ctx
    h = f.params.h(ctx)
    scales = []
    for phi in kernel_basis(f.params.m, f.precision):
        total = ctx.zero
        for beta in range(f.params.k + 1):
            x = f.params.node(beta, ctx)
            total += abs(f.C[beta] * phi.value(x))
            total += h * abs(f.C1[beta] * phi.derivative(x))
        scales.append(total)
    return scales


def relative_constraint_residuals(f: FdFormula) -> list[Any]:
    """Constraint residuals divided by their term magnitudes."""
    relative = []
    for r, s in zip(constraint_residuals(f), constraint_scales(f)):
        relative.append(abs(r) / s if s != 0 else abs(r))
    return relative


def check_admissible(f: FdFormula, tolerance: Optional[float] = None) -> list[Any]:
    """
    Raise unless every relative constraint residual is within tolerance.

    Args:
        f: Formula to check
        tolerance: Relative tolerance; defaults to the configured one for the precision

    Returns:
        The relative residuals

    Raises:
        AdmissibilityError: If any residual exceeds the tolerance
    """
    if tolerance is None:
        bits = f.precision.mantissa_bits
        tolerance = get_config().solver.admissibility_tolerance(bits)
    relative = relative_constraint_residuals(f)
    worst = max(relative)
    if worst > tolerance:
        raise AdmissibilityError(
            f"Formula violates exactness constraints: worst relative residual "
            f"{f.precision.ctx.nstr(worst, 5)} > {tolerance}",
            residuals=relative,
            tolerance=tolerance,
        )
    return relative


def norm_squared(f: FdFormula, tolerance: Optional[float] = None) -> Any:
    """
    Square of the norm of the error functional on W2^(m,m-1).

        (-1)^m [ sum C_g C_b G(hg - hb) - 2h sum C1_g C_b G'(hg - hb)
                 - h^2 sum C1_g C1_b G''(hg - hb) ]

    Kernels are evaluated once per distinct difference g - b in [-k, k].

    Args:
        f: Admissible formula
        tolerance: Relative constraint tolerance for the admissibility guard

    Returns:
        Non-negative norm squared (up to rounding)

    Raises:
        AdmissibilityError: If the formula is not admissible
    """
    check_admissible(f, tolerance)
    ctx = f.precision.ctx
    m, k = f.params.m, f.params.k
    h = f.params.h(ctx)

    g, g1, g2 = {}, {}, {}
    for d in range(-k, k + 1):
        x = f.params.node(d, ctx)
        g[d] = green_g(m, x, f.precision)
        g1[d] = green_g1(m, x, f.precision)
        g2[d] = green_g2(m, x, f.precision)

    s_cc = ctx.zero
    s_c1c = ctx.zero
    s_c1c1 = ctx.zero
    for gamma in range(k + 1):
        for beta in range(k + 1):
            d = gamma - beta
            s_cc += f.C[gamma] * f.C[beta] * g[d]
            s_c1c += f.C1[gamma] * f.C[beta] * g1[d]
            s_c1c1 += f.C1[gamma] * f.C1[beta] * g2[d]
    total = s_cc - 2 * h * s_c1c - h * h * s_c1c1
    return total if m % 2 == 0 else -total


def w_norm_sq(
    phi: TestFunction, m: int, precision: Optional[PrecisionContext] = None
) -> Any:
    """
    Squared W2^(m,m-1) seminorm: integral over [0,1] of (phi^(m) + phi^(m-1))^2.

    Composite Gauss-Legendre on 1, 2, 4, ... equal panels until two successive
    values agree to the configured relative tolerance.

    Args:
        phi: Test function with ``nth_derivative``
        m: Smoothness order
        precision: Working precision; defaults to the configured one

    Returns:
        The integral as an mpf

    Raises:
        ValueError: If phi carries no higher derivatives
        NonConvergence: If refinement does not settle
    """
    if phi.nth_derivative is None:
        raise ValueError(f"{phi.name} has no analytic higher derivatives")
    precision = resolve_precision(precision)
    ctx = precision.ctx
    settings = get_config().precision
    nth = phi.nth_derivative

    def integrand(x: Any) -> Any:
        v = nth(m, x) + nth(m - 1, x)
        return v * v

    history: list[Any] = []
    for level in range(settings.max_refinements):
        panels = 2**level
        points = [ctx.mpf(i) / panels for i in range(panels + 1)]
        value = ctx.quad(
            integrand,
            points,
            method="gauss-legendre",
            maxdegree=precision.quadrature_order,
        )
        logger.debug(
            f"w_norm_sq({phi.name}, m={m}) panels={panels}: {ctx.nstr(value, 20)}"
        )
        if history:
            previous = history[-1]
            if abs(value - previous) <= settings.quadrature_tolerance * abs(value):
                return value
        history.append(value)
    raise NonConvergence(
        f"Quadrature for {phi.name} did not settle after "
        f"{settings.max_refinements} refinements",
        last_values=history[-3:],
    )
