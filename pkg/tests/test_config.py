"""
Unit tests for environment-driven configuration.
"""

import pytest
from pydantic import ValidationError

from optimal_adams.config import Config, SolverConfig, get_config, reset_config
from optimal_adams.models import PrecisionContext, resolve_precision


def test_defaults():
    """Defaults apply with a clean environment."""
    config = Config.from_env()
    assert config.precision.mantissa_bits == 256
    assert config.integrator.default_startup == "rk4"
    assert config.integrator.sweep_max_workers == 4
    assert config.cache.cache_enabled is True
    assert config.cache.cache_ttl_seconds == 3600
    assert config.log_level == "INFO"


def test_environment_overrides(monkeypatch):
    """Environment variables override the defaults."""
    monkeypatch.setenv("PRECISION_BITS", "128")
    monkeypatch.setenv("FORMULA_CACHE_ENABLED", "false")
    monkeypatch.setenv("SWEEP_MAX_WORKERS", "2")
    monkeypatch.setenv("DEFAULT_STARTUP", " Exact ")
    config = Config.from_env()
    assert config.precision.mantissa_bits == 128
    assert config.cache.cache_enabled is False
    assert config.integrator.sweep_max_workers == 2
    assert config.integrator.default_startup == "exact"


def test_bad_startup_rejected(monkeypatch):
    """An unknown DEFAULT_STARTUP is rejected."""
    monkeypatch.setenv("DEFAULT_STARTUP", "euler")
    with pytest.raises(ValueError):
        Config.from_env()


def test_precision_below_double_rejected(monkeypatch):
    """Fewer than 53 mantissa bits is rejected."""
    monkeypatch.setenv("PRECISION_BITS", "32")
    with pytest.raises(ValidationError):
        Config.from_env()


def test_get_config_is_a_singleton(monkeypatch):
    """get_config caches until reset_config."""
    first = get_config()
    assert get_config() is first
    monkeypatch.setenv("PRECISION_BITS", "128")
    assert get_config().precision.mantissa_bits == 256
    reset_config()
    assert get_config().precision.mantissa_bits == 128


def test_admissibility_tolerance_by_precision():
    """The admissibility tolerance relaxes below 128 bits."""
    solver = SolverConfig()
    assert solver.admissibility_tolerance(256) == 1e-20
    assert solver.admissibility_tolerance(128) == 1e-20
    assert solver.admissibility_tolerance(53) == 1e-8


def test_resolve_precision_follows_config(monkeypatch):
    """Without an explicit context the configured precision is used."""
    monkeypatch.setenv("PRECISION_BITS", "160")
    reset_config()
    assert resolve_precision().mantissa_bits == 160
    explicit = PrecisionContext(mantissa_bits=64)
    assert resolve_precision(explicit) is explicit
