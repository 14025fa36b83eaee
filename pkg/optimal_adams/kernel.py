"""
Green's function family of W2^(m,m-1) and Euler-Frobenius polynomials.

    G_m(x)   = sign(x)/2 * (sinh x - sum_{j=1}^{m-1} x^(2j-1)/(2j-1)!)
    G'_m(x)  = sign(x)/2 * (cosh x - sum_{j=1}^{m-1} x^(2j-2)/(2j-2)!)
    G''_m(x) = sign(x)/2 * (sinh x - sum_{j=1}^{m-2} x^(2j-1)/(2j-1)!)

with sign(0) = 0. All three are evaluated on |x| and the sign reapplied, so
parity holds bit-for-bit.
"""

import logging
from typing import Any, Optional

from mpmath import MPContext
from pydantic import BaseModel, ConfigDict

from optimal_adams.models import IntPolynomial, PrecisionContext, resolve_precision

logger = logging.getLogger(__name__)

# Below this radius the truncated series cancels badly; sum the tail instead.
SERIES_RADIUS = 0.5


def _check_order(m: int) -> None:
    if m < 3:
        raise ValueError(f"Kernel order must be >= 3, got m={m}")


def _tail(ctx: MPContext, a: Any, first_power: int) -> Any:
    """sum_{p = first_power, first_power + 2, ...} a^p / p! for a >= 0."""
    if a == 0:
        return ctx.zero
    term = a**first_power / ctx.factorial(first_power)
    total = term
    p = first_power
    while True:
        term = term * a * a / ((p + 1) * (p + 2))
        p += 2
        if abs(term) <= ctx.eps * abs(total):
            return total
        total += term


def _sinh_tail(ctx: MPContext, a: Any, n: int) -> Any:
    """sinh a - sum_{j=1}^{n-1} a^(2j-1)/(2j-1)!, a >= 0."""
    if a <= SERIES_RADIUS:
        return _tail(ctx, a, 2 * n - 1)
    partial = ctx.zero
    for j in range(1, n):
        partial += a ** (2 * j - 1) / ctx.factorial(2 * j - 1)
    return ctx.sinh(a) - partial


def _cosh_tail(ctx: MPContext, a: Any, n: int) -> Any:
    """cosh a - sum_{j=1}^{n-1} a^(2j-2)/(2j-2)!, a >= 0."""
    if a <= SERIES_RADIUS:
        return _tail(ctx, a, 2 * n - 2)
    partial = ctx.zero
    for j in range(1, n):
        partial += a ** (2 * j - 2) / ctx.factorial(2 * j - 2)
    return ctx.cosh(a) - partial


def green_g(m: int, x: Any, precision: Optional[PrecisionContext] = None) -> Any:
    """
    Evaluate G_m(x).

    Args:
        m: Smoothness order (>= 3)
        x: Real argument
        precision: Working precision; defaults to the configured one

    Returns:
        G_m(x) as an mpf; even in x and zero at x = 0

    Raises:
        ValueError: If m < 3
    """
    _check_order(m)
    ctx = resolve_precision(precision).ctx
    a = abs(ctx.mpf(x))
    return _sinh_tail(ctx, a, m) / 2


def green_g1(m: int, x: Any, precision: Optional[PrecisionContext] = None) -> Any:
    """
    Evaluate G'_m(x), the derivative of G_m for x != 0.

    Args:
        m: Smoothness order (>= 3)
        x: Real argument
        precision: Working precision; defaults to the configured one

    Returns:
        G'_m(x) as an mpf; odd in x and zero at x = 0

    Raises:
        ValueError: If m < 3
    """
    _check_order(m)
    ctx = resolve_precision(precision).ctx
    x = ctx.mpf(x)
    if x == 0:
        return ctx.zero
    value = _cosh_tail(ctx, abs(x), m) / 2
    return value if x > 0 else -value


def green_g2(m: int, x: Any, precision: Optional[PrecisionContext] = None) -> Any:
    """
    Evaluate G''_m(x); equals green_g(m - 1, x) for m >= 4.

    Raises:
        ValueError: If m < 3
    """
    _check_order(m)
    ctx = resolve_precision(precision).ctx
    a = abs(ctx.mpf(x))
    return _sinh_tail(ctx, a, m - 1) / 2


class KernelFamily(BaseModel):
    """G_m, G'_m and G''_m bound to one order and precision."""

    model_config = ConfigDict(frozen=True)

    m: int
    precision: PrecisionContext

    def model_post_init(self, __context: Any) -> None:
        _check_order(self.m)

    def g(self, x: Any) -> Any:
        return green_g(self.m, x, self.precision)

    def g1(self, x: Any) -> Any:
        return green_g1(self.m, x, self.precision)

    def g2(self, x: Any) -> Any:
        return green_g2(self.m, x, self.precision)


def euler_frobenius(n: int) -> IntPolynomial:
    """
    Euler-Frobenius polynomial E_n with Eulerian-number coefficients.

    E_0 = 1 and E_n(t) = (n t + 1) E_{n-1}(t) + t (1 - t) E'_{n-1}(t), which on
    coefficients reads e_n[i] = (i + 1) e_{n-1}[i] + (n - i + 1) e_{n-1}[i - 1].

    Args:
        n: Degree (>= 0)

    Returns:
        IntPolynomial of degree n, ascending coefficients

    Raises:
        ValueError: If n < 0
    """
    if n < 0:
        raise ValueError(f"Euler-Frobenius degree must be >= 0, got n={n}")
    coeffs = [1]
    for d in range(1, n + 1):
        nxt = []
        for i in range(d + 1):
            current = coeffs[i] if i < len(coeffs) else 0
            previous = coeffs[i - 1] if i >= 1 else 0
            nxt.append((i + 1) * current + (d - i + 1) * previous)
        coeffs = nxt
    return IntPolynomial(coefficients=coeffs)
