"""
Command-line entry point.

Subcommands: coeffs, verify, spectral, integrate, convergence. Results go to
stdout (or --out, written atomically); logs go to stderr and the log file.

Exit codes:
    0  success
    1  configuration error, unknown problem, spectral precondition
    2  solver failure (singular system, bad support)
    3  verification failed
    4  spectral fit failure or root on the unit circle
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError, model_validator

from optimal_adams.cache import create_cache_from_config, set_cache
from optimal_adams.config import get_config
from optimal_adams.direct_solver import babuska_max_residual, get_optimal_formula
from optimal_adams.errors import (
    AdmissibilityError,
    DimensionError,
    FitFailure,
    OptimalAdamsError,
    RootOnCircle,
    SingularSystem,
    SpectralPrecondition,
    StartupUnavailable,
    UnknownProblem,
)
from optimal_adams.functional import norm_squared, relative_constraint_residuals
from optimal_adams.integrator import (
    convergence_frame,
    convergence_sweep,
    get_problem,
    integrate_adams_bashforth,
    integrate_optimal,
    trajectory_frame,
)
from optimal_adams.models import (
    FormulaParams,
    OptimalFormula,
    PrecisionContext,
    VerificationCheck,
    VerificationReport,
    resolve_precision,
)
from optimal_adams.optimality import perturbation_margin
from optimal_adams.precision import to_decimal_string
from optimal_adams.schemas import (
    ConvergencePayload,
    FdFormulaPayload,
    TrajectoryPayload,
    formula_to_payload,
    payload_to_optimal,
    spectral_to_payload,
    verification_to_json,
)
from optimal_adams.spectral import cross_validate
from optimal_adams.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3
EXIT_SPECTRAL = 4

Subcommand = Literal["coeffs", "verify", "spectral", "integrate", "convergence"]


class RunConfig(BaseModel):
    """Validated command-line arguments of one run."""

    subcommand: Subcommand
    m: int = 3
    N: int = 10
    k: int = 5
    precision_bits: Optional[int] = Field(default=None, ge=53)
    output_format: Literal["json", "csv"] = "json"
    output_path: Optional[Path] = None
    problem: Optional[str] = None
    N_list: list[int] = Field(default_factory=list)
    startup: Optional[Literal["exact", "rk4"]] = None
    seed: int = 0
    tolerance: Optional[float] = Field(default=None, gt=0)
    formula_path: Optional[Path] = None
    method: Literal["optimal", "adams-bashforth"] = "optimal"
    ab_steps: int = Field(default=2, ge=1, le=5)

    @model_validator(mode="after")
    def _check_run(self) -> "RunConfig":
        needs_params = self.subcommand in ("coeffs", "spectral") or (
            self.subcommand == "verify" and self.formula_path is None
        ) or (self.subcommand == "integrate" and self.method == "optimal")
        if needs_params:
            FormulaParams(m=self.m, N=self.N, k=self.k)
        if self.subcommand in ("integrate", "convergence") and not self.problem:
            raise ValueError(f"{self.subcommand} needs --problem")
        tabular = ("integrate", "convergence")
        if self.output_format == "csv" and self.subcommand not in tabular:
            raise ValueError(f"{self.subcommand} only writes JSON")
        if self.subcommand == "convergence":
            if len(self.N_list) < 3:
                raise ValueError("convergence needs --N-list with at least 3 values")
            for N in self.N_list:
                FormulaParams(m=self.m, N=N, k=self.k)
        return self

    @property
    def params(self) -> FormulaParams:
        return FormulaParams(m=self.m, N=self.N, k=self.k)

    @property
    def precision(self) -> PrecisionContext:
        if self.precision_bits is None:
            return resolve_precision()
        return PrecisionContext(mantissa_bits=self.precision_bits)


# --- output ------------------------------------------------------------------


def write_output(text: str, path: Optional[Path]) -> None:
    """Print to stdout, or replace path atomically through a sibling temp file."""
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.info(f"Wrote {path}")


# --- verification ----------------------------------------------------------------


def verify_formula(
    opt: OptimalFormula,
    tolerance: Optional[float] = None,
    seed: int = 0,
    samples: int = 100,
) -> VerificationReport:
    """
    Run every check on a formula.

    Checks: tolerance_attainable (only with an explicit tolerance), constraints,
    norm_squared, optimality_margin and babuska. Without an explicit tolerance
    the defaults are 1e-30 / 1e-25 / 1e-24 at 128 bits and above, 1e-8 below.
    """
    formula = opt.formula
    ctx = formula.precision.ctx
    bits = formula.precision.mantissa_bits
    high = bits >= 128
    tol_constraints = tolerance or (1e-30 if high else 1e-8)
    tol_margin = tolerance or (1e-25 if high else 1e-8)
    tol_babuska = tolerance or (1e-24 if high else 1e-8)

    def check(
        name: str, value: object, limit: float, passed: bool, detail: str = ""
    ) -> VerificationCheck:
        text = value if isinstance(value, str) else to_decimal_string(value, ctx)
        return VerificationCheck(
            name=name,
            value=text,
            tolerance=f"{limit:g}",
            passed=bool(passed),
            detail=detail,
        )

    checks = []
    if tolerance is not None:
        floor = ctx.ldexp(1, -bits)
        checks.append(
            check(
                "tolerance_attainable",
                floor,
                tolerance,
                tolerance >= floor,
                f"unit roundoff at {bits} bits",
            )
        )

    worst = max(relative_constraint_residuals(formula))
    checks.append(
        check("constraints", worst, tol_constraints, worst <= tol_constraints)
    )

    try:
        value = norm_squared(formula, tolerance=tol_constraints)
        checks.append(check("norm_squared", value, tol_margin, value > -tol_margin))
    except AdmissibilityError as e:
        checks.append(check("norm_squared", "nan", tol_margin, False, e.message))

    try:
        margin = perturbation_margin(
            opt, samples=samples, seed=seed, tolerance=tol_constraints
        )
        checks.append(
            check("optimality_margin", margin, tol_margin, margin >= -tol_margin)
        )
    except AdmissibilityError as e:
        checks.append(check("optimality_margin", "nan", tol_margin, False, e.message))

    babuska = babuska_max_residual(opt)
    checks.append(check("babuska", babuska, tol_babuska, babuska <= tol_babuska))

    params = formula.params
    report = VerificationReport(
        m=params.m, N=params.N, k=params.k, precision_bits=bits, checks=checks
    )
    if report.passed:
        logger.info(f"Verification passed for m={params.m}, N={params.N}, k={params.k}")
    else:
        logger.warning(f"Verification failed: {', '.join(report.failed_checks)}")
    return report


# --- subcommands ---------------------------------------------------------------------


def cmd_coeffs(run: RunConfig) -> int:
    opt = get_optimal_formula(run.params, run.precision)
    write_output(formula_to_payload(opt).model_dump_json(indent=2), run.output_path)
    return EXIT_OK


def cmd_verify(run: RunConfig) -> int:
    if run.formula_path is not None:
        payload = FdFormulaPayload.model_validate_json(run.formula_path.read_text())
        precision = run.precision if run.precision_bits is not None else None
        opt = payload_to_optimal(payload, precision)
    else:
        opt = get_optimal_formula(run.params, run.precision)
    report = verify_formula(opt, run.tolerance, run.seed)
    write_output(json.dumps(verification_to_json(report), indent=2), run.output_path)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_spectral(run: RunConfig) -> int:
    report = cross_validate(run.params, run.precision)
    payload = spectral_to_payload(report)
    write_output(payload.model_dump_json(indent=2, by_alias=True), run.output_path)
    if not report.passed:
        logger.warning("Root representation disagrees with the direct solve")
        return EXIT_SPECTRAL
    return EXIT_OK


def cmd_integrate(run: RunConfig) -> int:
    problem = get_problem(run.problem or "")
    if run.method == "optimal":
        trajectory = integrate_optimal(problem, run.params, run.startup, run.precision)
    else:
        trajectory = integrate_adams_bashforth(
            problem, run.ab_steps, run.N, run.startup
        )
    if run.output_format == "csv":
        write_output(trajectory_frame(trajectory).to_csv(index=False), run.output_path)
    else:
        payload = TrajectoryPayload(
            trajectory=trajectory,
            max_error=trajectory.max_error,
            startup=run.startup or get_config().integrator.default_startup,
        )
        write_output(payload.model_dump_json(indent=2), run.output_path)
    return EXIT_OK


def cmd_convergence(run: RunConfig) -> int:
    problem = get_problem(run.problem or "")
    reports = convergence_sweep(
        problem, run.m, run.k, run.ab_steps, run.N_list, run.startup, run.precision
    )
    if run.output_format == "csv":
        write_output(convergence_frame(reports).to_csv(index=False), run.output_path)
    else:
        payload = ConvergencePayload(
            problem=problem.name,
            startup=run.startup or get_config().integrator.default_startup,
            N_list=run.N_list,
            reports=reports,
        )
        write_output(payload.model_dump_json(indent=2), run.output_path)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "coeffs": cmd_coeffs,
    "verify": cmd_verify,
    "spectral": cmd_spectral,
    "integrate": cmd_integrate,
    "convergence": cmd_convergence,
}


# --- argument parsing --------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"Expected comma-separated integers, got {text!r}"
        )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, default=3, help="Smoothness order (>= 3)")
    common.add_argument("--N", type=int, default=10, help="Grid density, h = 1/N")
    common.add_argument("--k", type=int, default=5, help="Step count")
    common.add_argument(
        "--precision-bits", type=int, help="Mantissa bits (default from config)"
    )
    common.add_argument(
        "--format", dest="output_format", choices=["json", "csv"], default="json"
    )
    common.add_argument(
        "--out", dest="output_path", type=Path, help="Write here instead of stdout"
    )
    common.add_argument(
        "--seed", type=int, default=0, help="Seed of random perturbations"
    )
    common.add_argument(
        "--log-level",
        type=str,
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default from config)",
    )

    parser = argparse.ArgumentParser(
        prog="optimal_adams",
        description="Optimal explicit Adams-type formulas in W2^(m,m-1)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser(
        "coeffs", parents=[common], help="Solve for the optimal coefficients"
    )

    verify = sub.add_parser("verify", parents=[common], help="Check a formula")
    verify.add_argument(
        "--formula", dest="formula_path", type=Path, help="Formula JSON from coeffs"
    )
    verify.add_argument(
        "--tolerance", type=float, help="Override every check tolerance"
    )

    sub.add_parser("spectral", parents=[common], help="Root-based representation")

    integrate = sub.add_parser(
        "integrate", parents=[common], help="Integrate a built-in problem"
    )
    integrate.add_argument("--problem", required=True)
    integrate.add_argument("--startup", choices=["exact", "rk4"])
    integrate.add_argument(
        "--method", choices=["optimal", "adams-bashforth"], default="optimal"
    )
    integrate.add_argument(
        "--ab-steps", type=int, default=2, help="Adams-Bashforth steps (1..5)"
    )

    convergence = sub.add_parser(
        "convergence", parents=[common], help="Measure convergence orders"
    )
    convergence.add_argument("--problem", required=True)
    convergence.add_argument("--startup", choices=["exact", "rk4"])
    convergence.add_argument("--N-list", dest="N_list", type=_int_list, required=True)
    convergence.add_argument(
        "--ab-steps", type=int, default=2, help="Adams-Bashforth baseline steps"
    )

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)

    try:
        config = get_config()
    except (ValueError, ValidationError) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    setup_logging(log_level=args.log_level or config.log_level, log_dir=config.log_dir)
    set_cache(create_cache_from_config())

    fields = {name: value for name, value in vars(args).items() if value is not None}
    fields.pop("log_level", None)
    try:
        run = RunConfig(**fields)
    except ValidationError as e:
        logger.error(f"Invalid arguments: {e}")
        return EXIT_CONFIG

    try:
        return COMMANDS[run.subcommand](run)
    except (UnknownProblem, SpectralPrecondition, StartupUnavailable) as e:
        logger.error(e.message)
        return EXIT_CONFIG
    except (FitFailure, RootOnCircle) as e:
        logger.error(e.message)
        return EXIT_SPECTRAL
    except (SingularSystem, DimensionError) as e:
        logger.error(e.message)
        return EXIT_SOLVER
    except AdmissibilityError as e:
        logger.error(e.message)
        return EXIT_VERIFY
    except OptimalAdamsError as e:
        logger.error(e.message)
        return EXIT_SOLVER
    except (ValueError, ValidationError, OSError) as e:
        logger.error(f"{run.subcommand} failed: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
