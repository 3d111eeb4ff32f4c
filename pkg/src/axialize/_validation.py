"""Input validation helpers used by estimators and model constructors."""
import math

import numpy as np

from .exceptions import InsufficientDataError, InvalidConfigError


def check_positive(name, value, *, allow_zero=False, error=InvalidConfigError):
    value = float(value)
    if not math.isfinite(value):
        raise error(f"{name} must be finite, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise error(f"{name} must be {bound}, got {value!r}")
    return value


def check_finite(name, value, error=InvalidConfigError):
    value = float(value)
    if not math.isfinite(value):
        raise error(f"{name} must be finite, got {value!r}")
    return value


def check_1d(name, x, *, dtype=float, min_length=1):
    """Coerce to a finite 1-D array and check its length."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise InsufficientDataError(
            f"{name} needs at least {min_length} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_consistent_length(*arrays):
    lengths = {len(a) for a in arrays if a is not None}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent input lengths: {sorted(lengths)}")


def check_is_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        from sklearn.exceptions import NotFittedError
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first")
