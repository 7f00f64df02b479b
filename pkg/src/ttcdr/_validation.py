"""Argument checks shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np

# Largest dense array (in elements) the oracle paths will allocate.
MAX_DENSE_ELEMENTS = 2**31


class MemoryGuardError(MemoryError):
    """Raised when a dense object would exceed the memory guard."""


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_interval(interval) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in interval)
    except (TypeError, ValueError):
        raise ValueError(f"interval must be a pair of reals, got {interval!r}") from None
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise ValueError(f"interval must satisfy a < b, got ({a}, {b})")
    return a, b


def check_tolerance(tol, name: str = "tol", allow_zero: bool = True) -> float:
    tol = float(tol)
    if not np.isfinite(tol) or tol < 0 or (tol == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {tol}")
    return tol


def check_dense_size(dims, what: str = "dense tensor") -> int:
    """Return the element count of ``dims`` or raise MemoryGuardError."""
    size = 1
    for n in dims:
        size *= int(n)
    if size > MAX_DENSE_ELEMENTS:
        raise MemoryGuardError(
            f"{what} with dims {list(dims)} has {size} elements "
            f"(memory guard is {MAX_DENSE_ELEMENTS})"
        )
    return size
