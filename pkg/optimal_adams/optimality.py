"""
Independent optimality checks for solved formulas.

The norm squared of the error functional is a quadratic in C1,

    Q(x) = const + c.x + 1/2 x^T H x,
    H_ij = 2 (-1)^(m+1) h^2 G''_m(h g_i - h g_j),
    c_i  = (-1)^m (-2h) sum_beta C_beta G'_m(h g_i - h beta),

minimized over the affine set cut out by the m-1 exactness constraints. The
oracle parametrizes that set explicitly, x = x_p + Z y, and minimizes over y,
without multipliers or the assembled system.
"""

import logging
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from optimal_adams.direct_solver import constraint_matrix, rhs_g_alpha, rhs_g_exp
from optimal_adams.errors import SingularSystem
from optimal_adams.functional import norm_squared
from optimal_adams.kernel import green_g1, green_g2
from optimal_adams.models import (
    FdFormula,
    FormulaParams,
    OptimalFormula,
    PrecisionContext,
    resolve_precision,
)

logger = logging.getLogger(__name__)


class NullSpace(BaseModel):
    """Affine parametrization x = particular + basis @ y of the admissible C1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    support: list[int]
    particular: Any
    basis: Optional[Any] = None

    @property
    def dimension(self) -> int:
        return 0 if self.basis is None else self.basis.cols


def nullspace_parametrization(
    params: FormulaParams,
    C: Sequence[Any],
    support: Sequence[int],
    precision: Optional[PrecisionContext] = None,
) -> NullSpace:
    """
    Solve the constraints on the first m-1 support columns and free the rest.

    Args:
        params: Grid and order
        C: Left coefficients (k+1 entries)
        support: Indices of C1 that may be non-zero
        precision: Working precision; defaults to the configured one

    Returns:
        NullSpace with an n-vector particular solution and an n x (n-m+1) basis

    Raises:
        SingularSystem: If the pivot block is singular
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    m = params.m
    support = list(support)
    n = len(support)
    r = m - 1
    if n < r:
        raise ValueError(f"Support of size {n} cannot meet {r} constraints")

    A = constraint_matrix(params, support, precision)
    g = [rhs_g_alpha(params, C, a, precision) for a in range(1, m - 1)]
    g.append(rhs_g_exp(params, C, precision))

    B = ctx.matrix(r, r)
    for i in range(r):
        for j in range(r):
            B[i, j] = A[i, j]

    try:
        x_b = ctx.lu_solve(B, ctx.matrix(g))
        free = [
            ctx.lu_solve(B, ctx.matrix([A[i, j] for i in range(r)]))
            for j in range(r, n)
        ]
    except ZeroDivisionError as e:
        raise SingularSystem(f"Constraint pivot block is singular: {e}", size=r) from e

    particular = ctx.matrix(n, 1)
    for i in range(r):
        particular[i] = x_b[i]

    basis = ctx.matrix(n, n - r) if n > r else None
    for j, col in enumerate(free):
        for i in range(r):
            basis[i, j] = -col[i]
        basis[r + j, j] = ctx.one

    return NullSpace(support=support, particular=particular, basis=basis)


def oracle_minimize(
    params: FormulaParams,
    C: Sequence[Any],
    support: Sequence[int],
    precision: Optional[PrecisionContext] = None,
) -> list[Any]:
    """
    Minimize the norm squared over admissible C1 by null-space reduction.

    Returns:
        C1 with k+1 entries, zero outside the support
    """
    precision = resolve_precision(precision)
    ctx = precision.ctx
    m, k = params.m, params.k
    h = params.h(ctx)
    sign = 1 if m % 2 == 0 else -1
    space = nullspace_parametrization(params, C, support, precision)
    nodes = space.support
    n = len(nodes)

    H = ctx.matrix(n, n)
    c = ctx.matrix(n, 1)
    for i, gi in enumerate(nodes):
        for j, gj in enumerate(nodes):
            x = params.node(gi - gj, ctx)
            H[i, j] = -2 * sign * h * h * green_g2(m, x, precision)
        total = ctx.zero
        for beta, cb in enumerate(C):
            if cb != 0:
                total += cb * green_g1(m, params.node(gi - beta, ctx), precision)
        c[i] = -2 * sign * h * total

    Z = space.basis
    x = space.particular
    if space.dimension > 0:
        Zt = Z.T
        reduced = Zt * H * Z
        gradient = Zt * (H * space.particular + c)
        try:
            y = ctx.lu_solve(reduced, -gradient)
        except ZeroDivisionError as e:
            raise SingularSystem(
                f"Reduced Hessian is singular: {e}", size=space.dimension
            ) from e
        x = space.particular + Z * y

    C1 = [ctx.zero] * (k + 1)
    for i, beta in enumerate(nodes):
        C1[beta] = x[i]
    return C1


def perturbation_margin(
    opt: OptimalFormula,
    samples: int = 100,
    epsilon: float = 1e-3,
    seed: int = 0,
    tolerance: Optional[float] = None,
) -> Any:
    """
    Smallest change of the norm squared under random admissible perturbations.

    Each direction z = Z w (w standard normal, seeded) is scaled to unit
    Euclidean length; the formula C1 + epsilon z stays admissible. A minimum
    gives a margin >= 0 up to rounding.

    Args:
        opt: Solved formula
        samples: Number of random directions
        epsilon: Perturbation size
        seed: Seed for numpy's default_rng
        tolerance: Admissibility tolerance passed to norm_squared; defaults to
            the configured one for the working precision

    Returns:
        min over samples of norm_squared(C1 + epsilon z) - norm_squared(C1)
    """
    formula = opt.formula
    precision = formula.precision
    ctx = precision.ctx
    space = nullspace_parametrization(
        formula.params, formula.C, opt.support, precision
    )
    base = norm_squared(formula, tolerance=tolerance)
    if space.dimension == 0:
        return ctx.zero

    rng = np.random.default_rng(seed)
    eps = ctx.mpf(epsilon)
    margin = None
    for _ in range(samples):
        draws = rng.standard_normal(space.dimension)
        w = ctx.matrix([ctx.mpf(float(v)) for v in draws])
        z = space.basis * w
        z = z / ctx.norm(z, 2)
        C1 = list(formula.C1)
        for i, beta in enumerate(space.support):
            C1[beta] = C1[beta] + eps * z[i]
        perturbed = FdFormula(
            params=formula.params, C=formula.C, C1=C1, precision=precision
        )
        delta = norm_squared(perturbed, tolerance=tolerance) - base
        if margin is None or delta < margin:
            margin = delta
    logger.info(
        f"Perturbation margin over {samples} directions (eps={epsilon}): "
        f"{ctx.nstr(margin, 5)}"
    )
    return margin
