"""
Per-thread mpmath contexts and the lossless decimal-string codec.

Every real in the library lives in an ``MPContext`` whose ``prec`` equals the
requested mantissa bits. Contexts are never shared across threads, so changing
precision in one sweep worker cannot leak into another.
"""

import threading
from typing import Any, Optional

from mpmath import MPContext
from mpmath.libmp import prec_to_dps

_local = threading.local()


def context_for(mantissa_bits: int) -> MPContext:
    """
    Return this thread's mpmath context at the given precision.

    Args:
        mantissa_bits: Working precision in bits

    Returns:
        A context with ``prec == mantissa_bits``
    """
    contexts = getattr(_local, "contexts", None)
    if contexts is None:
        contexts = {}
        _local.contexts = contexts
    ctx = contexts.get(mantissa_bits)
    if ctx is None:
        ctx = MPContext()
        ctx.prec = mantissa_bits
        contexts[mantissa_bits] = ctx
    return ctx


def repr_digits(mantissa_bits: int) -> int:
    """Decimal digits that round-trip a value of the given precision."""
    return prec_to_dps(mantissa_bits) + 3


def to_decimal_string(value: Any, ctx: MPContext) -> str:
    """Format a real as a decimal string that parses back to the same value."""
    return ctx.nstr(ctx.mpf(value), repr_digits(ctx.prec), min_fixed=-3, max_fixed=3)


def from_decimal_string(text: str, ctx: MPContext) -> Any:
    """Parse a decimal string produced by to_decimal_string."""
    return ctx.mpf(text)


def complex_parts(value: Any, ctx: MPContext) -> tuple[str, str]:
    """Split a real or complex value into (re, im) decimal strings."""
    z = ctx.mpc(value)
    return to_decimal_string(z.real, ctx), to_decimal_string(z.imag, ctx)


def maybe_real(value: Any, ctx: MPContext, tolerance: Optional[Any] = None) -> Any:
    """Drop a negligible imaginary part, returning an mpf when it vanishes."""
    z = ctx.mpc(value)
    if z.imag == 0:
        return z.real
    if tolerance is not None and abs(z.imag) <= tolerance * max(abs(z), 1):
        return z.real
    return z
