"""
Root-based representation of the optimal Adams coefficients.

Interior coefficients satisfy

    C1_beta = sum_j (M_j lambda_j^beta + N_j lambda_j^(k - beta)),  beta = 1..k-2,

where lambda_j are the roots of P_{2m-4} inside the unit disk. The amplitudes
are fitted on interior nodes next to both ends and checked on every interior
node; C1_0 and C1_{k-1} then follow in closed form from the sum and
exponential constraints.
"""

import logging
from typing import Any, Optional

from mpmath import MPContext

from optimal_adams.config import get_config
from optimal_adams.direct_solver import get_optimal_formula
from optimal_adams.errors import FitFailure, RootOnCircle, SpectralPrecondition
from optimal_adams.kernel import euler_frobenius
from optimal_adams.models import (
    CharPolynomial,
    CrossValidationReport,
    FormulaParams,
    OptimalFormula,
    PrecisionContext,
    SpectralRep,
    resolve_precision,
)
from optimal_adams.precision import maybe_real

logger = logging.getLogger(__name__)


# --- polynomial helpers (ascending coefficient lists) -------------------------


def _poly_mul(p: list[Any], q: list[Any], ctx: MPContext) -> list[Any]:
    out = [ctx.zero] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_add(p: list[Any], q: list[Any], ctx: MPContext) -> list[Any]:
    size = max(len(p), len(q))
    out = [ctx.zero] * size
    for i, a in enumerate(p):
        out[i] += a
    for i, b in enumerate(q):
        out[i] += b
    return out


def _one_minus_pow(n: int, ctx: MPContext) -> list[Any]:
    """(1 - t)^n."""
    out = [ctx.one]
    for _ in range(n):
        out = _poly_mul(out, [ctx.one, -ctx.one], ctx)
    return out


def build_char_poly(
    m: int, h: Any, precision: Optional[PrecisionContext] = None
) -> CharPolynomial:
    """
    Characteristic polynomial of the interior coefficient recurrence.

        P(t) = (1 - e^(2h)) (1 - t)^(2m-4)
               - 2 (t (e^(2h) + 1) - e^h (t^2 + 1))
                 * sum_{s=0}^{m-3} h^(2s+1) (1 - t)^(2m-6-2s) E_{2s}(t) / (2s+1)!

    Args:
        m: Smoothness order (>= 3)
        h: Step length, 0 < h <= 1
        precision: Working precision; defaults to the configured one

    Returns:
        CharPolynomial of degree 2m-4

    Raises:
        ValueError: If m < 3 or h is outside (0, 1]
    """
    if m < 3:
        raise ValueError(f"Characteristic polynomial needs m >= 3, got m={m}")
    precision = resolve_precision(precision)
    ctx = precision.ctx
    h = ctx.mpf(h)
    if not 0 < h <= 1:
        raise ValueError(f"h must lie in (0, 1], got {ctx.nstr(h, 6)}")

    eh = ctx.exp(h)
    e2h = eh * eh
    quadratic = [-eh, e2h + 1, -eh]

    bracket = [ctx.zero]
    for s in range(m - 2):
        euler = [ctx.mpf(c) for c in euler_frobenius(2 * s).coefficients]
        term = _poly_mul(_one_minus_pow(2 * m - 6 - 2 * s, ctx), euler, ctx)
        scale = h ** (2 * s + 1) / ctx.factorial(2 * s + 1)
        bracket = _poly_add(bracket, [scale * c for c in term], ctx)

    first = [(1 - e2h) * c for c in _one_minus_pow(2 * m - 4, ctx)]
    second = [-2 * c for c in _poly_mul(quadratic, bracket, ctx)]
    coefficients = _poly_add(first, second, ctx)
    return CharPolynomial(m=m, h=h, coefficients=coefficients, precision=precision)


def palindromy_residual(p: CharPolynomial) -> Any:
    """max |p_s - p_{n-s}| / max |p_s|."""
    coeffs = p.coefficients
    n = len(coeffs) - 1
    scale = max(abs(c) for c in coeffs)
    worst = max(abs(coeffs[s] - coeffs[n - s]) for s in range(n + 1))
    return worst / scale


def _polish(coeffs_desc: list[Any], z: Any, ctx: MPContext, iterations: int) -> Any:
    for _ in range(iterations):
        value, slope = ctx.polyval(coeffs_desc, z, derivative=True)
        if slope == 0:
            break
        step = value / slope
        z = z - step
        if abs(step) <= ctx.eps * max(abs(z), 1):
            break
    return z


def all_roots(p: CharPolynomial) -> list[Any]:
    """
    All roots of P via companion-matrix eigenvalues and Newton polishing.

    Roots whose imaginary part is at rounding level are returned as reals.
    """
    ctx = p.precision.ctx
    settings = get_config().spectral
    coeffs = p.coefficients
    n = len(coeffs) - 1
    lead = coeffs[n]

    companion = ctx.matrix(n, n)
    for i in range(1, n):
        companion[i, i - 1] = ctx.one
    for i in range(n):
        companion[i, n - 1] = -coeffs[i] / lead
    eigenvalues = ctx.eig(companion, left=False, right=False)

    desc = list(reversed(coeffs))
    roots = []
    for z in eigenvalues:
        z = _polish(desc, ctx.mpc(z), ctx, settings.newton_max_iterations)
        real = maybe_real(z, ctx, tolerance=ctx.mpf(2) ** (-ctx.prec // 2))
        if not isinstance(real, ctx.mpc):
            real = _polish(desc, ctx.mpf(real), ctx, settings.newton_max_iterations)
        roots.append(real)
    roots.sort(key=lambda z: (abs(z), ctx.arg(z)))
    logger.debug(f"Roots of P_{n}: {[ctx.nstr(z, 12) for z in roots]}")
    return roots


def unit_disk_roots(p: CharPolynomial) -> list[Any]:
    """
    The m-2 roots of P strictly inside the unit disk.

    Ordered by ascending modulus, ties by ascending argument. Every returned
    root is paired with a reciprocal root outside the disk.

    Raises:
        RootOnCircle: If a root lies within the configured margin of |z| = 1
        FitFailure: If the inside count or the reciprocal pairing is off
    """
    ctx = p.precision.ctx
    settings = get_config().spectral
    roots = all_roots(p)

    for z in roots:
        if abs(abs(z) - 1) < settings.root_margin:
            raise RootOnCircle(
                f"Root {ctx.nstr(z, 15)} of P_{p.degree} lies on the unit circle "
                f"(m={p.m}, h={ctx.nstr(p.h, 10)})",
                root=z,
            )

    inside = [z for z in roots if abs(z) < 1]
    outside = [z for z in roots if abs(z) > 1]
    if len(inside) != p.m - 2:
        raise FitFailure(
            f"Expected {p.m - 2} roots inside the unit disk, found {len(inside)}"
        )
    for z in inside:
        pairing = min(abs(z * w - 1) for w in outside)
        if pairing > settings.pairing_tolerance:
            raise FitFailure(
                f"Root {ctx.nstr(z, 15)} has no reciprocal partner "
                f"(best |z w - 1| = {ctx.nstr(pairing, 5)})"
            )
    return inside


def fit_amplitudes(opt: OptimalFormula, roots: list[Any]) -> SpectralRep:
    """
    Fit M_j, N_j on the 2(m-2) interior nodes nearest the two ends.

    Nodes are beta = 1..m-2 and k-1-(m-2)..k-2; the representation is then
    checked on every interior node 1..k-2.

    Args:
        opt: Direct-solver output
        roots: unit_disk_roots of P for the same m and h

    Returns:
        SpectralRep with the fitted amplitudes and worst relative residual

    Raises:
        SpectralPrecondition: If k - 2 < 2(m - 2)
        FitFailure: If the interior residual exceeds the configured tolerance
    """
    formula = opt.formula
    params = formula.params
    precision = formula.precision
    ctx = precision.ctx
    settings = get_config().spectral
    m, k = params.m, params.k
    r = m - 2

    if k - 2 < 2 * r:
        raise SpectralPrecondition(
            f"Fitting needs k - 2 >= 2(m - 2) interior nodes; got k - 2 = {k - 2} "
            f"for m={m}, k={k}",
            interior_nodes=k - 2,
            required=2 * r,
        )
    if len(roots) != r:
        raise FitFailure(f"Expected {r} roots, got {len(roots)}")

    nodes = list(range(1, r + 1)) + list(range(k - 1 - r, k - 1))
    A = ctx.matrix(2 * r, 2 * r)
    b = ctx.matrix(2 * r, 1)
    for i, beta in enumerate(nodes):
        for j, lam in enumerate(roots):
            A[i, j] = lam**beta
            A[i, r + j] = lam ** (k - beta)
        b[i] = formula.C1[beta]
    solution = ctx.lu_solve(A, b)
    M = [maybe_real(solution[j], ctx) for j in range(r)]
    N = [maybe_real(solution[r + j], ctx) for j in range(r)]

    rep = SpectralRep(
        params=params,
        precision=precision,
        roots=list(roots),
        M=M,
        N=N,
        fit_residual=ctx.zero,
    )
    interior = range(1, k - 1)
    scale = max(abs(formula.C1[beta]) for beta in interior)
    worst = max(abs(ctx.re(rep.interior(beta)) - formula.C1[beta]) for beta in interior)
    rep.fit_residual = worst / scale
    if rep.fit_residual > settings.fit_tolerance:
        raise FitFailure(
            f"Root representation misses interior coefficients "
            f"for m={m}, N={params.N}, k={k}",
            residual=rep.fit_residual,
            tolerance=settings.fit_tolerance,
        )
    return rep


def conjugate_residual(rep: SpectralRep) -> Any:
    """
    Worst mismatch between the amplitudes of conjugate roots.

    For each root the partner is the root nearest its conjugate (itself when
    real); M and N of the partner must be the conjugates of its own. Relative
    to the largest amplitude.
    """
    ctx = rep.precision.ctx
    roots = rep.roots
    amplitudes = list(rep.M) + list(rep.N)
    scale = max((abs(a) for a in amplitudes), default=ctx.zero) or ctx.one
    worst = ctx.zero
    for j, lam in enumerate(roots):
        target = ctx.conj(lam)
        partner = min(range(len(roots)), key=lambda i: abs(roots[i] - target))
        worst = max(
            worst,
            abs(rep.M[partner] - ctx.conj(rep.M[j])),
            abs(rep.N[partner] - ctx.conj(rep.N[j])),
        )
    return worst / scale


def boundary_coeffs(rep: SpectralRep) -> tuple[Any, Any]:
    """
    Closed forms for C1_0 and C1_{k-1} from the fitted representation.

    With E = e^(hk-h), S_j = (M_j + N_j l_j)(1 - l_j^(k-2)) l_j / (1 - l_j) and

        X_j = [M_j (e^(hk-2h) - l_j^(k-2)) (l_j e^h - 1) l_j
               + N_j (l_j^(k-2) e^(hk-2h) - 1) (e^h - l_j) l_j^2]
              / [(e^h - l_j)(l_j e^h - 1) e^(hk-2h)],

        C1_0     = (e^h - h e^h - 1) / (h e^h (E - 1)) + 1/(E - 1) sum_j (S_j - E X_j)
        C1_{k-1} = (h e^(hk) - e^h + 1) / (h e^h (E - 1)) - E/(E - 1) sum_j (S_j - X_j)

    Returns:
        (C0, Ck1) as real mpf values; also stored on rep
    """
    params = rep.params
    ctx = rep.precision.ctx
    k = params.k
    h = params.h(ctx)
    eh = ctx.exp(h)
    big_e = ctx.exp(params.node(k - 1, ctx))
    e_k2 = ctx.exp(params.node(k - 2, ctx))
    e_hk = ctx.exp(params.node(k, ctx))

    sum_c0 = ctx.mpc(0)
    sum_ck1 = ctx.mpc(0)
    for lam, M, N in zip(rep.roots, rep.M, rep.N):
        lam_k2 = lam ** (k - 2)
        s = (M + N * lam) * (1 - lam_k2) * lam / (1 - lam)
        denominator = (eh - lam) * (lam * eh - 1)
        m_part = M * (e_k2 - lam_k2) * (lam * eh - 1) * lam
        n_part = N * (lam_k2 * e_k2 - 1) * (eh - lam) * lam**2
        sum_c0 += s - (m_part * eh + n_part * eh) / denominator
        sum_ck1 += s - (m_part + n_part) / (denominator * e_k2)

    C0 = (eh - h * eh - 1) / (h * eh * (big_e - 1)) + sum_c0 / (big_e - 1)
    Ck1 = (h * e_hk - eh + 1) / (h * eh * (big_e - 1)) - big_e / (big_e - 1) * sum_ck1
    rep.C0 = ctx.re(C0)
    rep.Ck1 = ctx.re(Ck1)
    return rep.C0, rep.Ck1


def cross_validate(
    params: FormulaParams, precision: Optional[PrecisionContext] = None
) -> CrossValidationReport:
    """
    Run the direct solve and the root-based representation and compare them.

    Discrepancies are relative to max |C1_beta| of the direct solution.

    Raises:
        SpectralPrecondition, FitFailure, RootOnCircle: From the components
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    settings = get_config().spectral
    k = params.k
    h = params.h(ctx)

    opt = get_optimal_formula(params, precision)
    poly = build_char_poly(params.m, h, precision)
    roots = unit_disk_roots(poly)
    rep = fit_amplitudes(opt, roots)
    C0, Ck1 = boundary_coeffs(rep)

    C1 = opt.formula.C1
    scale = max(abs(c) for c in C1)
    interior = [rep.interior(beta) for beta in range(1, k - 1)]
    imaginary = max(abs(ctx.im(v)) for v in interior)
    interior_real = [ctx.re(v) for v in interior]

    sum_check = abs(C0 + Ck1 + ctx.fsum(interior_real) - 1)
    exp_target = (ctx.exp(-params.node(k - 1, ctx)) - ctx.exp(-params.node(k, ctx))) / h
    exp_value = C0 + Ck1 * ctx.exp(-params.node(k - 1, ctx))
    for beta, v in zip(range(1, k - 1), interior_real):
        exp_value += v * ctx.exp(-params.node(beta, ctx))
    exp_check = abs(exp_value - exp_target) / abs(exp_target)

    c0_gap = abs(C0 - C1[0]) / scale
    ck1_gap = abs(Ck1 - C1[k - 1]) / scale
    palindromy = palindromy_residual(poly)
    conjugate = conjugate_residual(rep)
    worst = max(c0_gap, ck1_gap, sum_check, exp_check)
    passed = (
        worst <= settings.boundary_tolerance
        and rep.fit_residual <= settings.fit_tolerance
        and imaginary <= settings.imaginary_tolerance
        and conjugate <= settings.conjugate_tolerance
        and palindromy <= ctx.mpf("1e-30")
    )
    logger.info(
        f"Cross-validation m={params.m}, N={params.N}, k={k}: "
        f"fit={ctx.nstr(rep.fit_residual, 3)}, boundary={ctx.nstr(worst, 3)}, "
        f"imaginary={ctx.nstr(imaginary, 3)}, conjugate={ctx.nstr(conjugate, 3)}, "
        f"passed={passed}"
    )
    return CrossValidationReport(
        params=params,
        roots=list(roots),
        palindromy_residual=palindromy,
        fit_residual=rep.fit_residual,
        imaginary_residual=imaginary,
        conjugate_residual=conjugate,
        C0_discrepancy=c0_gap,
        Ck1_discrepancy=ck1_gap,
        sum_check=sum_check,
        exp_check=exp_check,
        max_discrepancy=worst,
        passed=passed,
        representation=rep,
    )
