"""Input validation helpers shared by the library, estimator and CLI."""

from __future__ import annotations

import math
import numbers

import numpy as np

from .exceptions import InvalidDimensionError, InvalidParameterError


def check_dimension(n) -> int:
    """Return ``n`` as an int after checking it is an integer ``>= 3``."""
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        if isinstance(n, numbers.Real) and float(n).is_integer():
            n = int(n)
        else:
            raise InvalidDimensionError(f"dimension must be an integer, got {n!r}", n=repr(n))
    n = int(n)
    if n < 3:
        raise InvalidDimensionError(f"dimension must be >= 3, got {n}", n=n)
    return n


def check_real(value, name: str, *, positive: bool = False, nonnegative: bool = False,
               finite: bool = True) -> float:
    """Coerce ``value`` to float and check sign and finiteness constraints."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}", name=name)
    value = float(value)
    if math.isnan(value) or (finite and math.isinf(value)):
        raise InvalidParameterError(f"{name} must be finite, got {value}", name=name)
    if positive and not value > 0:
        raise InvalidParameterError(f"{name} must be positive, got {value}", name=name)
    if nonnegative and value < 0:
        raise InvalidParameterError(f"{name} must be non-negative, got {value}", name=name)
    return value


def check_int(value, name: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidParameterError(f"{name} must be an integer, got {value!r}", name=name)
    value = int(value)
    if minimum is not None and value < minimum:
        raise InvalidParameterError(f"{name} must be >= {minimum}, got {value}", name=name)
    return value


def check_mu_value(mu) -> float:
    """Check that a decay order is a finite real strictly greater than 1."""
    mu = check_real(mu, "mu")
    if not mu > 1.0:
        raise InvalidParameterError(f"mu must exceed 1, got {mu}", mu=mu)
    return mu


def check_seed(seed) -> dict[int, float]:
    """Normalize seed coefficients to ``{flat mode index: coefficient}``.

    Accepts a mapping (keys may be strings, as in JSON), a sequence of
    ``(index, value)`` pairs, or ``None``.
    """
    if seed is None:
        return {}
    items = seed.items() if hasattr(seed, "items") else seed
    out: dict[int, float] = {}
    for key, value in items:
        try:
            idx = int(key)
        except (TypeError, ValueError):
            raise InvalidParameterError(f"seed key {key!r} is not a mode index") from None
        if idx < 0:
            raise InvalidParameterError(f"seed mode index must be >= 0, got {idx}")
        out[idx] = check_real(value, f"seed[{idx}]")
    return dict(sorted(out.items()))


def check_1d(values, name: str = "array") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidParameterError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr
