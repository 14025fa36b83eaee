"""
Linear system for the optimal derivative coefficients and its solution.

For beta in the support Omega:

    sum_gamma h G''_m(h beta - h gamma) C1_gamma + P_{m-3}(h beta) + lam e^(-h beta)
        = f_m(h beta)

plus the moment rows h sum C1_gamma (h gamma)^(alpha-1) = g_alpha, alpha = 1..m-2,
and the exponential row h sum C1_gamma e^(-h gamma) = g_exp.
"""

import logging
from typing import Any, Mapping, Optional, Sequence, Union

from optimal_adams.cache import get_cache
from optimal_adams.config import get_config
from optimal_adams.errors import DimensionError, SingularSystem
from optimal_adams.kernel import KernelFamily, green_g1, green_g2
from optimal_adams.models import (
    AdamsSpec,
    FdFormula,
    FormulaParams,
    GenericSpec,
    OptimalFormula,
    PrecisionContext,
    SlaeSystem,
    resolve_precision,
)

logger = logging.getLogger(__name__)


def _power(ctx: Any, x: Any, a: int) -> Any:
    # 0^0 = 1 for the constant column
    return ctx.one if a == 0 else x**a


def adams_left_coeffs(
    k: Union[int, FormulaParams], precision: Optional[PrecisionContext] = None
) -> list[Any]:
    """
    Left coefficients of an explicit Adams-type formula.

    Args:
        k: Step count (>= 2), or FormulaParams carrying it
        precision: Working precision; defaults to the configured one

    Returns:
        k+1 values with C_k = 1, C_{k-1} = -1 and zeros elsewhere

    Raises:
        ValueError: If k < 2
    """
    steps = k.k if isinstance(k, FormulaParams) else int(k)
    if steps < 2:
        raise ValueError(f"Adams formulas need k >= 2, got k={steps}")
    ctx = resolve_precision(precision).ctx
    return [ctx.zero] * (steps - 1) + [-ctx.one, ctx.one]


# --- right-hand sides ----------------------------------------------------------


def rhs_f(
    params: FormulaParams,
    C: Sequence[Any],
    precision: Optional[PrecisionContext] = None,
) -> list[Any]:
    """
    f_m(h beta) = -sum_gamma C_gamma G'_m(h beta - h gamma) for beta = 0..k.

    Raises:
        ValueError: If C does not have k+1 entries
    """
    if len(C) != params.k + 1:
        raise ValueError(f"C must have k+1 = {params.k + 1} entries, got {len(C)}")
    precision = resolve_precision(precision)
    ctx = precision.ctx
    values = []
    for beta in range(params.k + 1):
        total = ctx.zero
        for gamma, c in enumerate(C):
            if c != 0:
                x = params.node(beta - gamma, ctx)
                total += c * green_g1(params.m, x, precision)
        values.append(-total)
    return values


def rhs_f_adams(
    params: FormulaParams, precision: Optional[PrecisionContext] = None
) -> list[Any]:
    """
    Closed form of f_m for Adams left coefficients, beta = 0..k.

    For beta <= k-1, with a = h beta - h k:
        1/2 (e^a/2 (1 - e^h) + e^(-a)/2 (1 - e^(-h))
             - sum_{j=2}^{m-1} (a^(2j-2) - (a+h)^(2j-2)) / (2j-2)!)
    and for beta = k:
        1/2 (cosh h - sum_{j=1}^{m-1} h^(2j-2)/(2j-2)!)
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    m, k = params.m, params.k
    h = params.h(ctx)
    eh = ctx.exp(h)
    emh = ctx.exp(-h)
    values = []
    for beta in range(k):
        a = params.node(beta - k, ctx)
        b = params.node(beta - k + 1, ctx)
        value = ctx.exp(a) / 2 * (1 - eh) + ctx.exp(-a) / 2 * (1 - emh)
        for j in range(2, m):
            value -= (a ** (2 * j - 2) - b ** (2 * j - 2)) / ctx.factorial(2 * j - 2)
        values.append(value / 2)
    last = ctx.cosh(h)
    for j in range(1, m):
        last -= _power(ctx, h, 2 * j - 2) / ctx.factorial(2 * j - 2)
    values.append(last / 2)
    return values


def rhs_g_alpha(
    params: FormulaParams,
    C: Sequence[Any],
    alpha: int,
    precision: Optional[PrecisionContext] = None,
) -> Any:
    """
    g_alpha = (1/alpha) sum_gamma C_gamma (h gamma)^alpha.

    Raises:
        ValueError: If alpha is outside 1..m-2
    """
    if not 1 <= alpha <= params.m - 2:
        raise ValueError(f"alpha must be in 1..{params.m - 2}, got {alpha}")
    ctx = resolve_precision(precision).ctx
    total = ctx.zero
    for gamma, c in enumerate(C):
        if c != 0:
            total += c * params.node(gamma, ctx) ** alpha
    return total / alpha


def rhs_g_alpha_adams(
    params: FormulaParams, alpha: int, precision: Optional[PrecisionContext] = None
) -> Any:
    """g_alpha = h^alpha/alpha (k^alpha - (k-1)^alpha) for Adams left coefficients."""
    if not 1 <= alpha <= params.m - 2:
        raise ValueError(f"alpha must be in 1..{params.m - 2}, got {alpha}")
    ctx = resolve_precision(precision).ctx
    h = params.h(ctx)
    k = params.k
    return h**alpha / alpha * (k**alpha - (k - 1) ** alpha)


def rhs_g_exp(
    params: FormulaParams,
    C: Sequence[Any],
    precision: Optional[PrecisionContext] = None,
) -> Any:
    """g_exp = -sum_gamma C_gamma e^(-h gamma)."""
    ctx = resolve_precision(precision).ctx
    total = ctx.zero
    for gamma, c in enumerate(C):
        if c != 0:
            total += c * ctx.exp(-params.node(gamma, ctx))
    return -total


def rhs_g_exp_adams(
    params: FormulaParams, precision: Optional[PrecisionContext] = None
) -> Any:
    """g_exp = e^(-hk+h) - e^(-hk) for Adams left coefficients."""
    ctx = resolve_precision(precision).ctx
    k = params.k
    return ctx.exp(-params.node(k - 1, ctx)) - ctx.exp(-params.node(k, ctx))


# --- functions of a discrete argument ------------------------------------------


def discrete_dot(phi: Mapping[int, Any], psi: Mapping[int, Any]) -> Any:
    """[phi, psi] = sum_beta phi(h beta) psi(h beta) for finitely supported phi, psi."""
    total = 0
    for beta, value in phi.items():
        other = psi.get(beta)
        if other is not None:
            total = total + value * other
    return total


def discrete_convolve(phi: Mapping[int, Any], psi: Mapping[int, Any], beta: int) -> Any:
    """(phi * psi)(h beta) = sum_gamma phi(h gamma) psi(h beta - h gamma)."""
    total = 0
    for gamma, value in phi.items():
        other = psi.get(beta - gamma)
        if other is not None:
            total = total + value * other
    return total


# --- assembly and solve --------------------------------------------------------


def constraint_rows(
    params: FormulaParams,
    support: Sequence[int],
    precision: Optional[PrecisionContext] = None,
) -> list[list[Any]]:
    """
    Coefficient rows of the m-1 constraints on C1 restricted to the support.

    Rows alpha = 1..m-2 hold h (h gamma)^(alpha-1); the last row holds h e^(-h gamma).
    """
    ctx = resolve_precision(precision).ctx
    h = params.h(ctx)
    rows = []
    for alpha in range(1, params.m - 1):
        rows.append([h * _power(ctx, params.node(g, ctx), alpha - 1) for g in support])
    rows.append([h * ctx.exp(-params.node(g, ctx)) for g in support])
    return rows


def constraint_matrix(
    params: FormulaParams,
    support: Sequence[int],
    precision: Optional[PrecisionContext] = None,
) -> Any:
    """The constraint rows as an (m-1) x len(support) mpmath matrix."""
    ctx = resolve_precision(precision).ctx
    return ctx.matrix(constraint_rows(params, support, precision))


def assemble(
    spec: Union[AdamsSpec, GenericSpec], precision: Optional[PrecisionContext] = None
) -> SlaeSystem:
    """
    Build the square system for C1 on the support plus the m-1 multipliers.

    Adams specs use the closed-form right-hand sides; generic specs sum over C.

    Args:
        spec: AdamsSpec, or GenericSpec with left coefficients and support
        precision: Working precision; defaults to the configured one

    Returns:
        SlaeSystem of size |Omega| + m - 1

    Raises:
        DimensionError: If the support has fewer than m-1 nodes or leaves [0, k]
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    params = spec.params
    m = params.m

    if isinstance(spec, AdamsSpec):
        support = spec.support
        C = adams_left_coeffs(params, precision)
        f_values = rhs_f_adams(params, precision)
        g_values = [rhs_g_alpha_adams(params, a, precision) for a in range(1, m - 1)]
        g_values.append(rhs_g_exp_adams(params, precision))
    else:
        support = spec.resolved_support()
        C = [ctx.mpf(c) for c in spec.C]
        f_values = rhs_f(params, C, precision)
        g_values = [rhs_g_alpha(params, C, a, precision) for a in range(1, m - 1)]
        g_values.append(rhs_g_exp(params, C, precision))

    if any(b < 0 or b > params.k for b in support):
        raise DimensionError(
            f"Support {support} leaves the grid 0..{params.k}",
            support_size=len(support),
            required=m - 1,
        )
    if len(support) < m - 1:
        raise DimensionError(
            f"Support of size {len(support)} cannot meet {m - 1} constraints",
            support_size=len(support),
            required=m - 1,
        )

    kernels = KernelFamily(m=m, precision=precision)
    h = params.h(ctx)
    n_support = len(support)
    size = n_support + m - 1
    A = ctx.matrix(size, size)
    rhs = []

    for i, beta in enumerate(support):
        for j, gamma in enumerate(support):
            A[i, j] = h * kernels.g2(params.node(beta - gamma, ctx))
        x = params.node(beta, ctx)
        for a in range(m - 2):
            A[i, n_support + a] = _power(ctx, x, a)
        A[i, size - 1] = ctx.exp(-x)
        rhs.append(f_values[beta])

    for r, row in enumerate(constraint_rows(params, support, precision)):
        for j, value in enumerate(row):
            A[n_support + r, j] = value
        rhs.append(g_values[r])

    labels = [f"C1[{b}]" for b in support]
    labels += [f"p[{a}]" for a in range(m - 2)]
    labels.append("lambda_exp")

    logger.debug(
        f"Assembled {size}x{size} system for m={m}, N={params.N}, k={params.k}"
    )
    return SlaeSystem(
        params=params,
        precision=precision,
        C=C,
        support=list(support),
        matrix=A,
        rhs=rhs,
        unknown_labels=labels,
    )


def solve(system: SlaeSystem) -> OptimalFormula:
    """
    Solve the assembled system with partial pivoting and one refinement step.

    Args:
        system: Output of assemble()

    Returns:
        OptimalFormula with C1 on the support, zeros elsewhere

    Raises:
        SingularSystem: If elimination meets a numerically zero pivot
    """
    ctx = system.precision.ctx
    params = system.params
    A = system.matrix
    b = ctx.matrix(system.rhs)

    try:
        x = ctx.lu_solve(A, b)
        correction = ctx.lu_solve(A, ctx.residual(A, x, b))
    except ZeroDivisionError as e:
        raise SingularSystem(
            f"System of size {system.size} is singular at {ctx.prec} bits: {e}",
            size=system.size,
        ) from e
    x = x - correction

    r = ctx.residual(A, x, b)
    scale = ctx.mnorm(A, ctx.inf) * ctx.norm(x, ctx.inf) + ctx.norm(b, ctx.inf)
    residual_norm = ctx.norm(r, ctx.inf) / scale if scale != 0 else ctx.norm(r, ctx.inf)
    condition = ctx.cond(A)

    n_support = len(system.support)
    C1 = [ctx.zero] * (params.k + 1)
    for i, beta in enumerate(system.support):
        C1[beta] = x[i]
    multipliers = [x[i] for i in range(n_support, system.size)]

    config = get_config()
    label = f"m={params.m}, N={params.N}, k={params.k}"
    if condition > config.solver.condition_warn_threshold:
        logger.warning(
            f"Condition estimate {ctx.nstr(condition, 3)} above "
            f"{config.solver.condition_warn_threshold:g} for {label}"
        )
    if residual_norm > config.solver.residual_tolerance:
        logger.warning(
            f"Relative residual {ctx.nstr(residual_norm, 3)} above "
            f"{config.solver.residual_tolerance:g} for {label} at {ctx.prec} bits"
        )
    logger.info(
        f"Solved m={params.m}, N={params.N}, k={params.k}: size={system.size}, "
        f"cond={ctx.nstr(condition, 3)}, residual={ctx.nstr(residual_norm, 3)}"
    )

    formula = FdFormula(
        params=params, C=list(system.C), C1=C1, precision=system.precision
    )
    return OptimalFormula(
        formula=formula,
        multipliers=multipliers,
        support=list(system.support),
        residual_norm=residual_norm,
        condition_estimate=condition,
    )


def explicit_support(formula: FdFormula) -> list[int]:
    """0..k-1 when C1_k vanishes, else 0..k."""
    k = formula.params.k
    return list(range(k)) if formula.C1[k] == 0 else list(range(k + 1))


def babuska_node_check(opt: OptimalFormula) -> list[Any]:
    """
    Residuals of the optimality condition at every support node.

    Recomputes h (G''_m * C1)(h beta) + P_{m-3}(h beta) + lam e^(-h beta) - f_m(h beta)
    through a discrete convolution and the generic f_m sum, independently of the
    assembled matrix. All vanish at the optimum.
    """
    formula = opt.formula
    params = formula.params
    precision = formula.precision
    ctx = precision.ctx
    m, k = params.m, params.k
    h = params.h(ctx)

    c1 = {b: formula.C1[b] for b in opt.support}
    kernel = {
        d: h * green_g2(m, params.node(d, ctx), precision) for d in range(-k, k + 1)
    }
    f_values = rhs_f(params, formula.C, precision)
    poly = opt.multipliers[:-1]
    lam = opt.multipliers[-1]

    residuals = []
    for beta in opt.support:
        x = params.node(beta, ctx)
        value = discrete_convolve(c1, kernel, beta)
        for a, p in enumerate(poly):
            value += p * _power(ctx, x, a)
        value += lam * ctx.exp(-x)
        residuals.append(value - f_values[beta])
    return residuals


def babuska_max_residual(opt: OptimalFormula) -> Any:
    """Largest node residual relative to max |f_m(h beta)| over the support."""
    f_values = rhs_f(opt.formula.params, opt.formula.C, opt.formula.precision)
    scale = max(abs(f_values[b]) for b in opt.support)
    worst = max(abs(r) for r in babuska_node_check(opt))
    return worst / scale if scale != 0 else worst


def fit_multipliers(formula: FdFormula) -> OptimalFormula:
    """
    Recover the multipliers of a formula stored without them.

    Least squares over the support rows of the optimality condition; for an
    optimal formula the fit is exact and babuska_node_check returns ~0.
    """
    precision = formula.precision
    ctx = precision.ctx
    params = formula.params
    m, k = params.m, params.k
    h = params.h(ctx)
    support = explicit_support(formula)

    f_values = rhs_f(params, formula.C, precision)
    c1 = {b: formula.C1[b] for b in support}
    kernel = {
        d: h * green_g2(m, params.node(d, ctx), precision) for d in range(-k, k + 1)
    }

    A = ctx.matrix(len(support), m - 1)
    b = ctx.matrix(len(support), 1)
    for i, beta in enumerate(support):
        x = params.node(beta, ctx)
        for a in range(m - 2):
            A[i, a] = _power(ctx, x, a)
        A[i, m - 2] = ctx.exp(-x)
        b[i] = f_values[beta] - discrete_convolve(c1, kernel, beta)
    solution, residual = ctx.qr_solve(A, b)
    logger.debug(f"Multiplier least-squares residual {ctx.nstr(residual, 5)}")

    return OptimalFormula(
        formula=formula,
        multipliers=[solution[i] for i in range(m - 1)],
        support=support,
        residual_norm=residual,
        condition_estimate=ctx.nan,
    )


def get_optimal_formula(
    params: FormulaParams, precision: Optional[PrecisionContext] = None
) -> OptimalFormula:
    """
    Solve the Adams-type problem for params, reusing the formula cache when set.

    Args:
        params: Grid and order
        precision: Working precision; defaults to the configured one

    Returns:
        OptimalFormula
    """
    precision = resolve_precision(precision)
    cache = get_cache()
    key = (params.m, params.N, params.k, precision.mantissa_bits)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            logger.debug(f"Formula cache hit for {key}")
            return cached
    opt = solve(assemble(AdamsSpec(params=params), precision))
    if cache is not None:
        cache.set(key, opt)
    return opt
