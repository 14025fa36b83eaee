"""
Optimal Adams-type formulas as explicit k-step integrators for y' = f(x, y).

    y_n = y_{n-1} + h sum_{beta=0}^{k-1} w_beta f(x_{n-k+beta}, y_{n-k+beta}),  n = k..N

The optimal weights w = C1 are computed once on the anchor window [0, hk] and
slid along the grid; polynomial exactness is shift-invariant and
l(e^(-(x+c))) = e^(-c) l(e^(-x)) = 0, so every window inherits the constraints.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd

from optimal_adams.config import get_config
from optimal_adams.direct_solver import get_optimal_formula
from optimal_adams.errors import DegenerateFit, StartupUnavailable, UnknownProblem
from optimal_adams.models import (
    ConvergenceReport,
    ConvergenceRow,
    FormulaParams,
    IvpProblem,
    MethodSpec,
    PrecisionContext,
    Trajectory,
    resolve_precision,
)

logger = logging.getLogger(__name__)

STARTUP_MODES = ("exact", "rk4")


# --- built-in problems ---------------------------------------------------------


def _logistic_exact(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


PROBLEMS: dict[str, IvpProblem] = {
    "exp-decay": IvpProblem(
        name="exp-decay",
        rhs=lambda x, y: -y,
        y0=1.0,
        exact=lambda x: math.exp(-x),
        exact_mp=lambda ctx, x: ctx.exp(-x),
        description="y' = -y, y(0) = 1",
    ),
    "exp-growth": IvpProblem(
        name="exp-growth",
        rhs=lambda x, y: y,
        y0=1.0,
        exact=math.exp,
        exact_mp=lambda ctx, x: ctx.exp(x),
        description="y' = y, y(0) = 1",
    ),
    "poly": IvpProblem(
        name="poly",
        rhs=lambda x, y: 3 * x * x,
        y0=0.0,
        exact=lambda x: x**3,
        exact_mp=lambda ctx, x: x**3,
        description="y' = 3x^2, y(0) = 0",
    ),
    "logistic": IvpProblem(
        name="logistic",
        rhs=lambda x, y: y * (1 - y),
        y0=0.5,
        exact=_logistic_exact,
        exact_mp=lambda ctx, x: 1 / (1 + ctx.exp(-x)),
        description="y' = y(1 - y), y(0) = 1/2",
    ),
}


def get_problem(name: str) -> IvpProblem:
    """
    Look up a built-in problem.

    Raises:
        UnknownProblem: If the name is not in the corpus
    """
    try:
        return PROBLEMS[name]
    except KeyError:
        raise UnknownProblem(
            f"Unknown problem {name!r}; choose from {', '.join(sorted(PROBLEMS))}",
            name=name,
        ) from None


# --- shared marching -------------------------------------------------------------


def rk4_startup(
    problem: IvpProblem, h: Any, count: int, one: Any = 1.0
) -> list[Any]:
    """First ``count`` values y_0..y_{count-1} by classical RK4 at step h."""
    values = [problem.y0 * one]
    x = 0 * one
    y = values[0]
    f = problem.rhs
    for _ in range(count - 1):
        k1 = f(x, y)
        k2 = f(x + h / 2, y + h / 2 * k1)
        k3 = f(x + h / 2, y + h / 2 * k2)
        k4 = f(x + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = x + h
        values.append(y)
    return values


def _startup_values(
    problem: IvpProblem,
    startup: str,
    N: int,
    count: int,
    ctx: Optional[Any],
) -> list[Any]:
    if startup not in STARTUP_MODES:
        raise ValueError(f"startup must be one of {STARTUP_MODES}, got {startup!r}")
    if startup == "exact":
        if ctx is None:
            if problem.exact is None:
                raise StartupUnavailable(
                    f"Problem {problem.name!r} has no exact solution",
                    problem=problem.name,
                )
            return [problem.exact(i / N) for i in range(count)]
        if problem.exact_mp is None:
            raise StartupUnavailable(
                f"Problem {problem.name!r} has no exact solution", problem=problem.name
            )
        return [problem.exact_mp(ctx, ctx.mpf(i) / N) for i in range(count)]
    if ctx is None:
        return rk4_startup(problem, 1.0 / N, count)
    return rk4_startup(problem, ctx.mpf(1) / N, count, one=ctx.one)


def _march(
    problem: IvpProblem,
    weights: Sequence[Any],
    N: int,
    startup: str,
    method: str,
    ctx: Optional[Any] = None,
) -> Trajectory:
    """Run the sliding-window recursion with the given weights."""
    k = len(weights)
    if k > N:
        raise ValueError(f"Step count k={k} exceeds N={N}")
    if ctx is None:
        h: Any = 1.0 / N
        xs: list[Any] = [i / N for i in range(N + 1)]
    else:
        h = ctx.mpf(1) / N
        xs = [ctx.mpf(i) / N for i in range(N + 1)]

    ys = _startup_values(problem, startup, N, k, ctx)
    fs = [problem.rhs(xs[i], ys[i]) for i in range(k)]
    for n in range(k, N + 1):
        window = fs[n - k : n]
        increment = sum(w * v for w, v in zip(weights, window))
        y = ys[n - 1] + h * increment
        ys.append(y)
        fs.append(problem.rhs(xs[n], y))

    errors = None
    if ctx is None and problem.exact is not None:
        errors = [abs(y - problem.exact(x)) for x, y in zip(xs, ys)]
    elif ctx is not None and problem.exact_mp is not None:
        errors = [float(abs(y - problem.exact_mp(ctx, x))) for x, y in zip(xs, ys)]

    return Trajectory(
        method=method,
        problem=problem.name,
        N=N,
        x=[float(x) for x in xs],
        y=[float(y) for y in ys],
        error=errors,
    )


# --- optimal formula ---------------------------------------------------------------


def optimal_weights(
    params: FormulaParams,
    precision: Optional[PrecisionContext] = None,
    multiprecision: bool = False,
) -> list[Any]:
    """C1_0..C1_{k-1} of the optimal formula, as floats unless multiprecision."""
    opt = get_optimal_formula(params, precision)
    weights = opt.formula.C1[: params.k]
    if multiprecision:
        return list(weights)
    return [float(w) for w in weights]


def integrate_optimal(
    problem: IvpProblem,
    params: FormulaParams,
    startup: Optional[str] = None,
    precision: Optional[PrecisionContext] = None,
    multiprecision: bool = False,
) -> Trajectory:
    """
    Integrate on [0, 1] with the optimal k-step formula for (m, N, k).

    Args:
        problem: Initial value problem
        params: Order, grid density and step count
        startup: 'exact' or 'rk4' for y_0..y_{k-1}; defaults to the configured mode
        precision: Precision of the coefficient solve, and of the march when
            multiprecision
        multiprecision: March in mpmath instead of float64

    Returns:
        Trajectory over all N+1 nodes

    Raises:
        StartupUnavailable: If exact startup is requested for a problem without
            an exact solution
    """
    startup = startup or get_config().integrator.default_startup
    precision = resolve_precision(precision)
    weights = optimal_weights(params, precision, multiprecision)
    ctx = precision.ctx if multiprecision else None
    method = f"optimal(m={params.m},k={params.k})"
    trajectory = _march(problem, weights, params.N, startup, method, ctx)
    logger.info(
        f"{method} on {problem.name}, N={params.N}, startup={startup}: "
        f"max error {trajectory.max_error}"
    )
    return trajectory


# --- Adams-Bashforth baseline --------------------------------------------------------


def adams_bashforth_weights(
    k_steps: int, precision: Optional[PrecisionContext] = None
) -> list[Any]:
    """
    Classical Adams-Bashforth weights b_0..b_{k-1} for nodes n-k..n-1.

    Solved from the moment conditions
        sum_j b_j j^q = (k^(q+1) - (k-1)^(q+1)) / (q+1),  q = 0..k-1,
    i.e. exact integration over [k-1, k] of the interpolant on nodes 0..k-1.

    Raises:
        ValueError: If k_steps is outside 1..5
    """
    if not 1 <= k_steps <= 5:
        raise ValueError(f"Adams-Bashforth steps must be in 1..5, got {k_steps}")
    ctx = resolve_precision(precision).ctx
    k = k_steps
    A = ctx.matrix(k, k)
    b = ctx.matrix(k, 1)
    for q in range(k):
        for j in range(k):
            A[q, j] = ctx.one if q == 0 else ctx.mpf(j) ** q
        b[q] = ctx.mpf(k ** (q + 1) - (k - 1) ** (q + 1)) / (q + 1)
    solution = ctx.lu_solve(A, b)
    return [solution[j] for j in range(k)]


def integrate_adams_bashforth(
    problem: IvpProblem,
    k_steps: int,
    N: int,
    startup: Optional[str] = None,
) -> Trajectory:
    """Integrate on [0, 1] with the classical k-step Adams-Bashforth method."""
    startup = startup or get_config().integrator.default_startup
    weights = [float(w) for w in adams_bashforth_weights(k_steps)]
    method = f"adams-bashforth(k={k_steps})"
    trajectory = _march(problem, weights, N, startup, method)
    logger.info(f"{method} on {problem.name}, N={N}: max error {trajectory.max_error}")
    return trajectory


# --- convergence measurement -------------------------------------------------


def _runner(
    method: MethodSpec,
    problem: IvpProblem,
    N_list: Sequence[int],
    startup: str,
    precision: PrecisionContext,
) -> Callable[[int], Trajectory]:
    """Resolve all coefficients up front so the per-N runs only march floats."""
    if method.kind == "optimal":
        if method.m is None:
            raise ValueError("optimal method needs m")
        weights = {
            N: optimal_weights(FormulaParams(m=method.m, N=N, k=method.k), precision)
            for N in N_list
        }
    else:
        ab = [float(w) for w in adams_bashforth_weights(method.k, precision)]
        weights = {N: ab for N in N_list}

    def run(N: int) -> Trajectory:
        return _march(problem, weights[N], N, startup, method.label)

    return run


def measure_order(
    method: MethodSpec,
    problem: IvpProblem,
    N_list: Sequence[int],
    startup: Optional[str] = None,
    precision: Optional[PrecisionContext] = None,
) -> ConvergenceReport:
    """
    Fit the convergence order from max errors over a list of grid densities.

    The order is the least-squares slope of -log(max error) against log N.

    Args:
        method: Optimal (m, k) or Adams-Bashforth k
        problem: Problem with a known exact solution
        N_list: At least three strictly increasing grid densities
        startup: 'exact' or 'rk4'; defaults to the configured mode
        precision: Precision of the coefficient solves

    Returns:
        ConvergenceReport with per-N errors and the fitted order

    Raises:
        ValueError: If N_list is too short or not strictly increasing
        DegenerateFit: If any error is at or below the exact threshold
    """
    N_list = list(N_list)
    if len(N_list) < 3:
        raise ValueError(f"N_list needs at least 3 entries, got {len(N_list)}")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError(f"N_list must be strictly increasing, got {N_list}")
    if problem.exact is None:
        raise StartupUnavailable(
            f"Problem {problem.name!r} has no exact solution to measure errors against",
            problem=problem.name,
        )

    config = get_config()
    startup = startup or config.integrator.default_startup
    precision = resolve_precision(precision)
    run = _runner(method, problem, N_list, startup, precision)

    with ThreadPoolExecutor(max_workers=config.integrator.sweep_max_workers) as pool:
        trajectories = list(pool.map(run, N_list))

    rows = [
        ConvergenceRow(N=t.N, max_abs_error=float(t.max_error or 0.0))
        for t in trajectories
    ]
    errors = np.array([row.max_abs_error for row in rows])
    if np.any(errors <= config.integrator.exact_threshold):
        report = ConvergenceReport(
            method=method.label, problem=problem.name, rows=rows, exact=True
        )
        raise DegenerateFit(
            f"{method.label} reproduces {problem.name} exactly; no order to fit",
            report=report,
        )

    slope = np.polyfit(np.log(np.array(N_list, dtype=float)), -np.log(errors), 1)[0]
    logger.info(f"{method.label} on {problem.name}: fitted order {slope:.3f}")
    return ConvergenceReport(
        method=method.label, problem=problem.name, rows=rows, fitted_order=float(slope)
    )


def convergence_sweep(
    problem: IvpProblem,
    m: int,
    k: int,
    ab_steps: int,
    N_list: Sequence[int],
    startup: Optional[str] = None,
    precision: Optional[PrecisionContext] = None,
) -> list[ConvergenceReport]:
    """Measure the optimal formula and the Adams-Bashforth baseline on one grid list."""
    reports = []
    for method in (
        MethodSpec(kind="optimal", m=m, k=k),
        MethodSpec(kind="adams-bashforth", k=ab_steps),
    ):
        try:
            reports.append(measure_order(method, problem, N_list, startup, precision))
        except DegenerateFit as e:
            logger.info(e.message)
            reports.append(e.report)
    return reports


# --- output -------------------------------------------------------------------------


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    """Trajectory as columns x, y, error."""
    data: dict[str, Any] = {"x": trajectory.x, "y": trajectory.y}
    if trajectory.error is not None:
        data["error"] = trajectory.error
    else:
        data["error"] = [np.nan] * len(trajectory.x)
    return pd.DataFrame(data)


def convergence_frame(reports: Sequence[ConvergenceReport]) -> pd.DataFrame:
    """One row per (method, N) with the method's fitted order repeated."""
    records = []
    for report in reports:
        for row in report.rows:
            records.append(
                {
                    "method": report.method,
                    "problem": report.problem,
                    "N": row.N,
                    "max_abs_error": row.max_abs_error,
                    "fitted_order": report.fitted_order,
                    "exact": report.exact,
                }
            )
    return pd.DataFrame.from_records(records)
