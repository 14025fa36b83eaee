"""
In-memory TTL cache for solved optimal formulas.

Library-level memo of OptimalFormula results keyed by (m, N, k, mantissa_bits).
Callers that request the same key more than once in a process, such as a
notebook or a script looping over cross_validate, get the stored solve. A CLI
run solves each key once, so it never hits the cache.
"""

import logging
import threading
import time
from typing import TYPE_CHECKING, Optional

from optimal_adams.config import get_config

if TYPE_CHECKING:
    from optimal_adams.models import OptimalFormula

logger = logging.getLogger(__name__)

FormulaKey = tuple[int, int, int, int]

# Singleton cache instance (set by the CLI at startup; read by direct_solver)
_cache_instance: Optional["FormulaCache"] = None
_lock = threading.Lock()


def get_cache() -> Optional["FormulaCache"]:
    """Return the global cache instance, or None if not initialized."""
    return _cache_instance


def set_cache(cache: Optional["FormulaCache"]) -> None:
    """Set (or clear, with None) the global cache instance."""
    global _cache_instance
    with _lock:
        _cache_instance = cache


class FormulaCache:
    """
    In-memory TTL cache of OptimalFormula keyed by (m, N, k, mantissa_bits).

    Thread-safe for get/set/invalidate.
    """

    def __init__(self, ttl_seconds: int = 3600) -> None:
        self._ttl = ttl_seconds
        self._store: dict[FormulaKey, tuple["OptimalFormula", float]] = {}
        self._lock = threading.Lock()

    def get(self, key: FormulaKey) -> Optional["OptimalFormula"]:
        """
        Return the cached formula for key if present and not expired.
        Otherwise return None.
        """
        with self._lock:
            entry = self._store.get(key)
            if entry is None:
                return None
            formula, expiry_ts = entry
            if time.time() >= expiry_ts:
                del self._store[key]
                return None
            return formula

    def set(self, key: FormulaKey, formula: "OptimalFormula") -> None:
        """Store formula for key with the configured TTL."""
        expiry_ts = time.time() + self._ttl
        with self._lock:
            self._store[key] = (formula, expiry_ts)

    def invalidate(self, key: FormulaKey) -> None:
        """Remove the cached entry for key so the next read solves again."""
        with self._lock:
            self._store.pop(key, None)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._store)


def create_cache_from_config() -> Optional[FormulaCache]:
    """
    Create and return a FormulaCache from config, or None if cache disabled.
    Does not set the global cache; caller should call set_cache(cache) if needed.
    """
    config = get_config()
    if not config.cache.cache_enabled:
        logger.info("Formula cache disabled")
        return None
    return FormulaCache(ttl_seconds=config.cache.cache_ttl_seconds)
