"""Input validation helpers used by the estimators and pure functions."""

from __future__ import annotations

import numbers

import numpy as np


def check_series(y, *, name="series", min_length=1, positive=False) -> np.ndarray:
    """Coerce ``y`` to a 1-D finite float array.

    Parameters
    ----------
    y : array_like
        Input sequence. Column vectors of shape ``(n, 1)`` are flattened.
    min_length : int
        Minimum accepted number of elements.
    positive : bool
        Require every element to be strictly positive.
    """
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


def check_confidence(c, name="confidence") -> float:
    if not isinstance(c, numbers.Real) or not 0.0 < float(c) < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {c!r}")
    return float(c)


def check_int(value, name, *, low=None, high=None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if low is not None and value < low:
        raise ValueError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValueError(f"{name} must be <= {high}, got {value}")
    return value


def check_open_unit(value, name) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {value}")
    return value
