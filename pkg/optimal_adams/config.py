"""
Configuration management for the optimal Adams formula toolkit.
"""

import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables from .env file
load_dotenv()


def _env_flag(name: str, default: bool) -> bool:
    raw = (os.getenv(name) or "").strip()
    if raw == "":
        return default
    return raw.lower() not in ("false", "0", "no")


class PrecisionConfig(BaseModel):
    """Working precision of the multiprecision arithmetic."""

    mantissa_bits: int = Field(
        default=256, ge=53, description="Mantissa bits of every mpmath context"
    )
    quadrature_order: int = Field(
        default=6, ge=1, description="Gauss-Legendre degree used for W-norm integrals"
    )
    quadrature_tolerance: float = Field(
        default=1e-25,
        description="Relative agreement required between quadrature refinements",
    )
    max_refinements: int = Field(
        default=10, ge=2, description="Panel doublings before quadrature gives up"
    )


class SolverConfig(BaseModel):
    """Direct solver tolerances and diagnostics thresholds."""

    condition_warn_threshold: float = Field(
        default=1e20, description="Warn when the system condition estimate exceeds this"
    )
    residual_tolerance: float = Field(
        default=1e-25, description="Relative residual expected after refinement"
    )
    admissibility_tolerance_high: float = Field(
        default=1e-20,
        description="Constraint tolerance for the norm guard at 128 bits and above",
    )
    admissibility_tolerance_low: float = Field(
        default=1e-8,
        description="Constraint tolerance for the norm guard below 128 bits",
    )

    def admissibility_tolerance(self, mantissa_bits: int) -> float:
        """Return the relative constraint tolerance for a working precision."""
        if mantissa_bits >= 128:
            return self.admissibility_tolerance_high
        return self.admissibility_tolerance_low


class SpectralConfig(BaseModel):
    """Root finding and amplitude fitting tolerances."""

    root_margin: float = Field(
        default=1e-10,
        description="Roots closer than this to the unit circle are rejected",
    )
    pairing_tolerance: float = Field(
        default=1e-25, description="Allowed |lambda * mu - 1| for reciprocal root pairs"
    )
    fit_tolerance: float = Field(
        default=1e-20, description="Relative reconstruction residual at interior nodes"
    )
    boundary_tolerance: float = Field(
        default=1e-18, description="Relative mismatch allowed for boundary coefficients"
    )
    imaginary_tolerance: float = Field(
        default=1e-28,
        description="Largest imaginary part allowed in reconstructed coefficients",
    )
    conjugate_tolerance: float = Field(
        default=1e-25,
        description="Relative mismatch allowed between amplitudes of conjugate roots",
    )
    newton_max_iterations: int = 50


class IntegratorConfig(BaseModel):
    """ODE benchmark settings."""

    default_startup: str = Field(
        default="rk4",
        description="Startup used for the first k values: 'rk4' or 'exact'",
    )
    exact_threshold: float = Field(
        default=1e-12,
        description="Max errors at or below this count as exact reproduction",
    )
    sweep_max_workers: int = Field(
        default=4, ge=1, description="Threads used by convergence sweeps"
    )


class CacheConfig(BaseModel):
    """In-memory cache configuration for solved optimal formulas."""

    cache_enabled: bool = Field(
        default=True, description="If true, cache solved formulas by (m, N, k, bits)."
    )
    cache_ttl_seconds: int = Field(
        default=3600, description="TTL in seconds for a solved formula."
    )


class Config(BaseModel):
    """Main application configuration."""

    precision: PrecisionConfig = Field(default_factory=PrecisionConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    spectral: SpectralConfig = Field(default_factory=SpectralConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    cache: CacheConfig = Field(
        default_factory=CacheConfig,
        description="Cache settings for solved formulas.",
    )
    log_level: str = "INFO"
    log_dir: Path = Path("logs")

    @classmethod
    def from_env(cls) -> "Config":
        """Create configuration from environment variables."""
        startup = os.getenv("DEFAULT_STARTUP", "rk4").strip().lower()
        if startup not in ("rk4", "exact"):
            raise ValueError(
                f"DEFAULT_STARTUP must be 'rk4' or 'exact', got {startup!r}"
            )

        return cls(
            precision=PrecisionConfig(
                mantissa_bits=int(os.getenv("PRECISION_BITS", "256")),
                quadrature_order=int(os.getenv("QUADRATURE_ORDER", "6")),
            ),
            solver=SolverConfig(
                condition_warn_threshold=float(
                    os.getenv("CONDITION_WARN_THRESHOLD", "1e20")
                ),
            ),
            spectral=SpectralConfig(),
            integrator=IntegratorConfig(
                default_startup=startup,
                exact_threshold=float(os.getenv("EXACT_THRESHOLD", "1e-12")),
                sweep_max_workers=int(os.getenv("SWEEP_MAX_WORKERS", "4")),
            ),
            cache=CacheConfig(
                cache_enabled=_env_flag("FORMULA_CACHE_ENABLED", True),
                cache_ttl_seconds=int(os.getenv("FORMULA_CACHE_TTL_SECONDS", "3600")),
            ),
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            log_dir=Path(os.getenv("LOG_DIR", "logs")),
        )


# Global configuration instance (will be initialized when needed)
_config: Optional[Config] = None


def get_config() -> Config:
    """Get the global configuration instance."""
    global _config
    if _config is None:
        _config = Config.from_env()
    return _config


def reset_config() -> None:
    """Drop the global instance so the next get_config() re-reads the environment."""
    global _config
    _config = None
