"""
Shared fixtures: isolated config and logs per test, solved formulas per session.
"""

import logging
from functools import lru_cache
from logging.handlers import RotatingFileHandler

import pytest

from optimal_adams.cache import set_cache
from optimal_adams.config import reset_config
from optimal_adams.direct_solver import assemble, solve
from optimal_adams.models import (
    AdamsSpec,
    FormulaParams,
    OptimalFormula,
    PrecisionContext,
)

HIGH = PrecisionContext(mantissa_bits=256)

# m in {3,4,5}, N in {5,10,20}, m <= k <= min(N, 10)
ADAMS_GRID = [
    (m, N, k)
    for m in (3, 4, 5)
    for N in (5, 10, 20)
    for k in range(m, min(N, 10) + 1)
]

# Grid points with k - 2 >= 2(m - 2)
SPECTRAL_GRID = [(m, N, k) for (m, N, k) in ADAMS_GRID if k - 2 >= 2 * (m - 2)]


@lru_cache(maxsize=None)
def solved(m: int, N: int, k: int, bits: int = 256) -> OptimalFormula:
    """Solve once per (m, N, k, bits) for the whole session."""
    precision = PrecisionContext(mantissa_bits=bits)
    return solve(assemble(AdamsSpec(params=FormulaParams(m=m, N=N, k=k)), precision))


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch, tmp_path):
    """Fresh config from a clean environment, logs under tmp_path, no global cache."""
    for name in (
        "PRECISION_BITS",
        "QUADRATURE_ORDER",
        "CONDITION_WARN_THRESHOLD",
        "DEFAULT_STARTUP",
        "EXACT_THRESHOLD",
        "SWEEP_MAX_WORKERS",
        "FORMULA_CACHE_ENABLED",
        "FORMULA_CACHE_TTL_SECONDS",
        "LOG_LEVEL",
    ):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("LOG_DIR", str(tmp_path / "logs"))
    reset_config()
    set_cache(None)
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level
    yield
    set_cache(None)
    reset_config()
    for handler in list(root.handlers):
        if handler not in saved_handlers:
            root.removeHandler(handler)
            if isinstance(handler, RotatingFileHandler):
                handler.close()
    for handler in saved_handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(saved_level)


@pytest.fixture
def solve_adams():
    """Session-cached Adams solver: solve_adams(m, N, k, bits=256)."""
    return solved
