"""
Unit tests for assembly and solution of the optimal-coefficient system.
"""

import logging
from unittest.mock import patch

import numpy as np
import pytest

from optimal_adams.cache import FormulaCache, set_cache
from optimal_adams.config import Config, SolverConfig
from optimal_adams.direct_solver import (
    adams_left_coeffs,
    assemble,
    babuska_max_residual,
    babuska_node_check,
    constraint_matrix,
    constraint_rows,
    discrete_convolve,
    discrete_dot,
    explicit_support,
    fit_multipliers,
    get_optimal_formula,
    rhs_f,
    rhs_f_adams,
    rhs_g_alpha,
    rhs_g_alpha_adams,
    rhs_g_exp,
    rhs_g_exp_adams,
    solve,
)
from optimal_adams.errors import DimensionError, SingularSystem
from optimal_adams.models import (
    AdamsSpec,
    FdFormula,
    FormulaParams,
    GenericSpec,
    OptimalFormula,
    PrecisionContext,
)
from optimal_adams.optimality import nullspace_parametrization, oracle_minimize

from tests.conftest import ADAMS_GRID, HIGH


def _relative_gap(a, b):
    scale = max(abs(v) for v in b)
    return max(abs(x - y) for x, y in zip(a, b)) / scale


# --- left coefficients and right-hand sides -------------------------------------


def test_adams_left_coeffs():
    """C_k = 1, C_{k-1} = -1, zeros elsewhere."""
    assert adams_left_coeffs(5, HIGH) == [0, 0, 0, 0, -1, 1]
    assert adams_left_coeffs(2, HIGH) == [0, -1, 1]
    params = FormulaParams(m=3, N=10, k=4)
    assert adams_left_coeffs(params, HIGH) == [0, 0, 0, -1, 1]


def test_adams_left_coeffs_rejects_single_step():
    """At least two steps are needed."""
    with pytest.raises(ValueError):
        adams_left_coeffs(1, HIGH)


@pytest.mark.parametrize("m,N,k", ADAMS_GRID)
def test_closed_form_rhs_matches_generic_sums(m, N, k):
    """Adams closed forms agree with the sums over C to 1e-30."""
    params = FormulaParams(m=m, N=N, k=k)
    C = adams_left_coeffs(params, HIGH)
    generic = rhs_f(params, C, HIGH)
    closed = rhs_f_adams(params, HIGH)
    assert len(closed) == k + 1
    assert _relative_gap(closed, generic) <= 1e-30
    for alpha in range(1, m - 1):
        a = rhs_g_alpha(params, C, alpha, HIGH)
        b = rhs_g_alpha_adams(params, alpha, HIGH)
        assert abs(a - b) <= 1e-30 * abs(b)
    a = rhs_g_exp(params, C, HIGH)
    b = rhs_g_exp_adams(params, HIGH)
    assert abs(a - b) <= 1e-30 * abs(b)


def test_rhs_values_by_hand():
    """Spot values for h = 0.1."""
    ctx = HIGH.ctx
    f = rhs_f_adams(FormulaParams(m=3, N=10, k=5), HIGH)
    assert float(f[5]) == pytest.approx(2.0840279e-6, rel=1e-6)
    assert abs(f[4] - f[5]) <= ctx.mpf("1e-60") * f[5]
    params = FormulaParams(m=4, N=10, k=5)
    value = rhs_g_alpha_adams(params, 2, HIGH)
    assert abs(value - ctx.mpf("0.045")) <= ctx.mpf("1e-70")
    expected = ctx.exp(-ctx.mpf("0.4")) - ctx.exp(-ctx.mpf("0.5"))
    assert abs(rhs_g_exp_adams(params, HIGH) - expected) <= ctx.mpf("1e-70")


def test_rhs_guards():
    """Right-hand sides check their inputs."""
    params = FormulaParams(m=3, N=10, k=5)
    with pytest.raises(ValueError):
        rhs_f(params, [1, 2], HIGH)
    with pytest.raises(ValueError):
        rhs_g_alpha(params, adams_left_coeffs(params, HIGH), 2, HIGH)
    with pytest.raises(ValueError):
        rhs_g_alpha_adams(params, 0, HIGH)


# --- discrete argument functions ------------------------------------------------------


def test_discrete_dot_and_convolution():
    """Integer inputs give exact integer results; convolution commutes."""
    phi = {0: 1, 1: 2, 3: -1}
    psi = {-1: 5, 0: 3, 1: 4, 2: 7}
    assert discrete_dot(phi, psi) == 1 * 3 + 2 * 4
    assert discrete_convolve(phi, psi, 1) == 1 * 4 + 2 * 3
    for beta in range(-2, 6):
        assert discrete_convolve(phi, psi, beta) == discrete_convolve(psi, phi, beta)


def test_discrete_functions_empty_overlap():
    """Disjoint supports give zero."""
    assert discrete_dot({0: 1}, {1: 1}) == 0
    assert discrete_convolve({0: 1}, {0: 1}, 5) == 0


# --- assembly ----------------------------------------------------------------


def test_assemble_shape_and_labels():
    """Size k + m - 1, unknowns ordered C1, p, lambda."""
    system = assemble(AdamsSpec(params=FormulaParams(m=4, N=10, k=6)), HIGH)
    assert system.size == 6 + 3
    assert system.support == list(range(6))
    assert system.unknown_labels[:6] == [f"C1[{b}]" for b in range(6)]
    assert system.unknown_labels[6:] == ["p[0]", "p[1]", "lambda_exp"]


def test_assemble_kernel_block_is_symmetric():
    """The Green's function block is symmetric."""
    system = assemble(AdamsSpec(params=FormulaParams(m=3, N=10, k=5)), HIGH)
    A = system.matrix
    for i in range(5):
        for j in range(5):
            assert A[i, j] == A[j, i]
        assert A[i, i] == 0


def test_assemble_rejects_small_support():
    """A support smaller than m - 1 is rejected."""
    params = FormulaParams(m=5, N=10, k=5)
    C = adams_left_coeffs(params, HIGH)
    with pytest.raises(DimensionError) as exc_info:
        assemble(GenericSpec(params=params, C=C, support=[0, 1, 2]), HIGH)
    assert exc_info.value.support_size == 3
    assert exc_info.value.required == 4


def test_assemble_rejects_support_off_grid():
    """Support nodes must lie in 0..k."""
    params = FormulaParams(m=3, N=10, k=5)
    with pytest.raises(DimensionError):
        C = adams_left_coeffs(params, HIGH)
        assemble(GenericSpec(params=params, C=C, support=[0, 9]), HIGH)


def test_zero_matrix_is_singular():
    """A singular system raises SingularSystem."""
    system = assemble(AdamsSpec(params=FormulaParams(m=3, N=10, k=5)), HIGH)
    zero = HIGH.ctx.matrix(system.size, system.size)
    degenerate = system.model_copy(update={"matrix": zero})
    with pytest.raises(SingularSystem) as exc_info:
        solve(degenerate)
    assert exc_info.value.size == 7


def test_generic_support_is_deduplicated():
    """Support indices are sorted and deduplicated."""
    params = FormulaParams(m=3, N=10, k=5)
    C = adams_left_coeffs(params, HIGH)
    spec = GenericSpec(params=params, C=C, support=[2, 0, 1, 1])
    assert spec.resolved_support() == [0, 1, 2]


# --- solution ----------------------------------------------------------------


def test_solution_shape(solve_adams):
    """k+1 coefficients with C1_k = 0 and sum C1 = 1."""
    opt = solve_adams(3, 10, 5)
    C1 = opt.formula.C1
    assert len(C1) == 6
    assert len(opt.formula.C) == 6
    assert C1[5] == 0
    assert abs(sum(C1) - 1) <= 1e-50
    assert opt.formula.is_adams()
    assert len(opt.multipliers) == 2
    assert opt.residual_norm <= 1e-60
    assert opt.condition_estimate > 1


def test_generic_spec_reproduces_adams(solve_adams):
    """Generic sums with Adams C and support 0..k-1 give the same formula."""
    params = FormulaParams(m=4, N=10, k=6)
    C = adams_left_coeffs(params, HIGH)
    spec = GenericSpec(params=params, C=C, support=list(range(6)))
    generic = solve(assemble(spec, HIGH))
    adams = solve_adams(4, 10, 6)
    assert _relative_gap(generic.formula.C1, adams.formula.C1) <= 1e-30


def test_generic_spec_default_support_is_full_grid():
    """Without a support every C1_0..C1_k is unknown."""
    params = FormulaParams(m=3, N=10, k=4)
    spec = GenericSpec(params=params, C=adams_left_coeffs(params, HIGH))
    system = assemble(spec, HIGH)
    assert system.support == list(range(5))


@pytest.mark.parametrize("m,N,k", ADAMS_GRID)
def test_solver_matches_nullspace_oracle(solve_adams, m, N, k):
    """Direct solve and constrained minimization agree to 1e-20 per coefficient."""
    opt = solve_adams(m, N, k)
    oracle = oracle_minimize(opt.formula.params, opt.formula.C, opt.support, HIGH)
    assert _relative_gap(oracle, opt.formula.C1) <= 1e-20


@pytest.mark.parametrize("m", [3, 4, 5])
def test_k_equal_m_has_one_free_direction(solve_adams, m):
    """With k = m the admissible set is a line; the solver still finds its minimum."""
    params = FormulaParams(m=m, N=10, k=m)
    opt = solve_adams(m, 10, m)
    space = nullspace_parametrization(params, opt.formula.C, opt.support, HIGH)
    assert space.dimension == 1
    oracle = oracle_minimize(params, opt.formula.C, opt.support, HIGH)
    assert _relative_gap(oracle, opt.formula.C1) <= 1e-20


# --- optimality condition at the nodes ---------------------------------------


@pytest.mark.parametrize("m,N,k", [(3, 10, 5), (4, 20, 8), (5, 20, 10), (3, 5, 5)])
def test_babuska_residuals_vanish(solve_adams, m, N, k):
    """The nodal optimality condition holds at every support node."""
    opt = solve_adams(m, N, k)
    assert len(babuska_node_check(opt)) == k
    assert babuska_max_residual(opt) <= 1e-24


def test_babuska_detects_perturbation(solve_adams):
    """A 1e-6 change in C1_0 shows up well above rounding."""
    opt = solve_adams(3, 10, 5)
    C1 = list(opt.formula.C1)
    C1[0] = C1[0] + HIGH.ctx.mpf("1e-6")
    formula = FdFormula(
        params=opt.formula.params, C=opt.formula.C, C1=C1, precision=HIGH
    )
    perturbed = OptimalFormula(
        formula=formula,
        multipliers=opt.multipliers,
        support=opt.support,
        residual_norm=opt.residual_norm,
        condition_estimate=opt.condition_estimate,
    )
    assert babuska_max_residual(perturbed) > 1e-8


def test_fit_multipliers_recovers_solution(solve_adams):
    """Least squares over the support rows recovers the multipliers."""
    opt = solve_adams(4, 10, 6)
    fitted = fit_multipliers(opt.formula)
    assert fitted.support == explicit_support(opt.formula) == list(range(6))
    assert _relative_gap(fitted.multipliers, opt.multipliers) <= 1e-20
    assert babuska_max_residual(fitted) <= 1e-24


# --- caching and diagnostics -------------------------------------------------


def test_get_optimal_formula_uses_cache():
    """Second call returns the cached object; keys include precision."""
    cache = FormulaCache(ttl_seconds=60)
    set_cache(cache)
    params = FormulaParams(m=3, N=10, k=4)
    first = get_optimal_formula(params, HIGH)
    second = get_optimal_formula(params, HIGH)
    assert first is second
    assert len(cache) == 1
    get_optimal_formula(params, PrecisionContext(mantissa_bits=128))
    assert len(cache) == 2


def test_get_optimal_formula_without_cache():
    """Without a cache every call solves again."""
    params = FormulaParams(m=3, N=10, k=4)
    assert get_optimal_formula(params, HIGH) is not get_optimal_formula(params, HIGH)


def test_condition_warning(caplog):
    """Condition estimates above the threshold are logged as warnings."""
    config = Config(solver=SolverConfig(condition_warn_threshold=1.0))
    with patch("optimal_adams.direct_solver.get_config", return_value=config):
        with caplog.at_level(logging.WARNING, logger="optimal_adams.direct_solver"):
            solve(assemble(AdamsSpec(params=FormulaParams(m=3, N=10, k=4)), HIGH))
    assert any("Condition estimate" in r.message for r in caplog.records)


def test_low_precision_solve(solve_adams):
    """A 53-bit solve agrees with the 256-bit one to double precision."""
    low = solve_adams(3, 10, 5, 53)
    high = solve_adams(3, 10, 5)
    assert low.formula.precision.mantissa_bits == 53
    assert _relative_gap(low.formula.C1, high.formula.C1) <= 1e-8


def test_constraint_matrix_matches_rows():
    """One row per constraint, one column per support node."""
    params = FormulaParams(m=4, N=10, k=6)
    support = list(range(6))
    A = constraint_matrix(params, support, HIGH)
    rows = constraint_rows(params, support, HIGH)
    assert (A.rows, A.cols) == (3, 6)
    assert all(A[i, j] == rows[i][j] for i in range(3) for j in range(6))


def _random_discrete(rng, low=-6, high=6):
    """Integer-valued discrete function on a random finite support."""
    size = int(rng.integers(1, 8))
    nodes = rng.choice(np.arange(low, high + 1), size=size, replace=False)
    return {int(b): int(rng.integers(-9, 10)) for b in nodes}


@pytest.mark.parametrize("seed", range(5))
def test_discrete_dot_is_bilinear_and_symmetric(seed):
    """[a phi + b chi, psi] = a [phi, psi] + b [chi, psi] on random supports."""
    rng = np.random.default_rng(seed)
    phi, chi, psi = (_random_discrete(rng) for _ in range(3))
    a, b = (int(v) for v in rng.integers(-5, 6, size=2))
    combined = {
        beta: a * phi.get(beta, 0) + b * chi.get(beta, 0)
        for beta in set(phi) | set(chi)
    }
    expected = a * discrete_dot(phi, psi) + b * discrete_dot(chi, psi)
    assert discrete_dot(combined, psi) == expected
    assert discrete_dot(phi, psi) == discrete_dot(psi, phi)


@pytest.mark.parametrize("seed", range(5))
def test_discrete_convolution_is_bilinear_and_commutes(seed):
    """phi * psi = psi * phi, and convolution is linear in phi at every node."""
    rng = np.random.default_rng(100 + seed)
    phi, chi, psi = (_random_discrete(rng) for _ in range(3))
    a, b = (int(v) for v in rng.integers(-5, 6, size=2))
    combined = {
        beta: a * phi.get(beta, 0) + b * chi.get(beta, 0)
        for beta in set(phi) | set(chi)
    }
    for beta in range(-14, 15):
        assert discrete_convolve(phi, psi, beta) == discrete_convolve(psi, phi, beta)
        expected = a * discrete_convolve(phi, psi, beta)
        expected += b * discrete_convolve(chi, psi, beta)
        assert discrete_convolve(combined, psi, beta) == expected


def test_residual_warning_at_low_precision(caplog):
    """A 53-bit solve cannot reach the configured residual and says so."""
    low = PrecisionContext(mantissa_bits=53)
    with caplog.at_level(logging.WARNING, logger="optimal_adams.direct_solver"):
        opt = solve(assemble(AdamsSpec(params=FormulaParams(m=3, N=10, k=5)), low))
    assert opt.residual_norm > 1e-25
    assert any("Relative residual" in r.message for r in caplog.records)


def test_no_residual_warning_at_high_precision(caplog):
    """A 256-bit solve stays inside the residual tolerance."""
    with caplog.at_level(logging.WARNING, logger="optimal_adams.direct_solver"):
        opt = solve(assemble(AdamsSpec(params=FormulaParams(m=3, N=10, k=5)), HIGH))
    assert opt.residual_norm <= 1e-25
    assert not any("Relative residual" in r.message for r in caplog.records)


def test_residual_tolerance_read_from_config(caplog):
    """The threshold comes from the solver settings."""
    config = Config(
        solver=SolverConfig(residual_tolerance=0.0, condition_warn_threshold=1e300)
    )
    with patch("optimal_adams.direct_solver.get_config", return_value=config):
        with caplog.at_level(logging.WARNING, logger="optimal_adams.direct_solver"):
            opt = solve(assemble(AdamsSpec(params=FormulaParams(m=3, N=10, k=4)), HIGH))
    warned = any("Relative residual" in r.message for r in caplog.records)
    assert warned == (opt.residual_norm > 0)
