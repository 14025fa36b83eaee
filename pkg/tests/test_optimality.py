"""
Unit tests for the null-space oracle and the perturbation margin.
"""

import pytest

from optimal_adams.direct_solver import (
    adams_left_coeffs,
    assemble,
    constraint_rows,
    solve,
)
from optimal_adams.errors import AdmissibilityError
from optimal_adams.functional import check_admissible
from optimal_adams.models import FdFormula, FormulaParams, GenericSpec
from optimal_adams.optimality import (
    nullspace_parametrization,
    oracle_minimize,
    perturbation_margin,
)

from tests.conftest import HIGH


def test_nullspace_basis_preserves_constraints():
    """Constraint rows annihilate every basis column of the null space."""
    params = FormulaParams(m=4, N=10, k=7)
    ctx = HIGH.ctx
    C = adams_left_coeffs(params, HIGH)
    support = list(range(7))
    space = nullspace_parametrization(params, C, support, HIGH)
    assert space.dimension == 7 - 3
    rows = constraint_rows(params, support, HIGH)
    for row in rows:
        for j in range(space.dimension):
            value = ctx.fsum(row[i] * space.basis[i, j] for i in range(7))
            assert abs(value) <= ctx.mpf("1e-60")


def test_nullspace_too_small_support():
    """Fewer support nodes than constraints is rejected."""
    params = FormulaParams(m=5, N=10, k=6)
    C = adams_left_coeffs(params, HIGH)
    with pytest.raises(ValueError):
        nullspace_parametrization(params, C, [0, 1, 2], HIGH)


def test_oracle_with_square_constraints_is_the_particular_solution():
    """A support of exactly m - 1 nodes leaves nothing to minimize."""
    params = FormulaParams(m=4, N=10, k=6)
    C = adams_left_coeffs(params, HIGH)
    support = [0, 2, 5]
    space = nullspace_parametrization(params, C, support, HIGH)
    assert space.dimension == 0
    assert space.basis is None
    C1 = oracle_minimize(params, C, support, HIGH)
    assert C1[1] == 0 and C1[3] == 0 and C1[4] == 0 and C1[6] == 0
    formula = FdFormula(params=params, C=C, C1=C1, precision=HIGH)
    assert max(check_admissible(formula)) <= 1e-30


def test_oracle_matches_generic_solver():
    """Both routes agree for a non-Adams support."""
    params = FormulaParams(m=3, N=10, k=6)
    C = adams_left_coeffs(params, HIGH)
    support = [0, 1, 3, 5]
    opt = solve(assemble(GenericSpec(params=params, C=C, support=support), HIGH))
    oracle = oracle_minimize(params, C, support, HIGH)
    scale = max(abs(c) for c in opt.formula.C1)
    assert max(abs(a - b) for a, b in zip(oracle, opt.formula.C1)) <= 1e-20 * scale


@pytest.mark.parametrize("m,N,k", [(3, 10, 5), (4, 10, 7), (5, 20, 8), (3, 20, 10)])
def test_perturbation_margin_non_negative(solve_adams, m, N, k):
    """Random admissible perturbations of size 1e-3 never lower the norm."""
    opt = solve_adams(m, N, k)
    margin = perturbation_margin(opt, samples=100, epsilon=1e-3, seed=0)
    assert margin >= -1e-25
    assert margin > 0


def test_perturbation_margin_is_seeded(solve_adams):
    """The same seed draws the same directions."""
    opt = solve_adams(3, 10, 6)
    first = perturbation_margin(opt, samples=10, seed=42)
    second = perturbation_margin(opt, samples=10, seed=42)
    assert first == second


def test_perturbation_margin_zero_without_freedom():
    """No free directions, no change."""
    params = FormulaParams(m=4, N=10, k=6)
    C = adams_left_coeffs(params, HIGH)
    opt = solve(assemble(GenericSpec(params=params, C=C, support=[0, 2, 5]), HIGH))
    assert perturbation_margin(opt, samples=5) == 0


def test_perturbation_margin_rejects_inadmissible(solve_adams):
    """A formula breaking the constraints has no margin."""
    opt = solve_adams(3, 10, 5)
    C1 = list(opt.formula.C1)
    C1[1] = C1[1] + HIGH.ctx.mpf("0.01")
    broken = opt.model_copy(
        update={
            "formula": FdFormula(
                params=opt.formula.params, C=opt.formula.C, C1=C1, precision=HIGH
            )
        }
    )
    with pytest.raises(AdmissibilityError):
        perturbation_margin(broken, samples=3)


def test_perturbation_margin_uses_given_tolerance(solve_adams):
    """A formula off by 1e-15 fails by default and passes with a looser bound."""
    opt = solve_adams(3, 10, 5)
    C1 = list(opt.formula.C1)
    C1[0] = C1[0] + HIGH.ctx.mpf("1e-15")
    shifted = opt.model_copy(
        update={
            "formula": FdFormula(
                params=opt.formula.params, C=opt.formula.C, C1=C1, precision=HIGH
            )
        }
    )
    with pytest.raises(AdmissibilityError):
        perturbation_margin(shifted, samples=3)
    margin = perturbation_margin(shifted, samples=3, tolerance=1e-10)
    assert margin > -1e-10
