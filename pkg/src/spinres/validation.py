"""Input validation helpers.

These mirror the role of ``sklearn.utils.validation`` for the data types used
here: complex reflection traces, strictly increasing frequency axes and unit
vectors.  Each helper returns a cleaned ``numpy`` array or raises
:class:`~spinres.exceptions.DomainError`.
"""

import numpy as np

from .exceptions import DomainError


def check_positive(value, name, allow_zero=False, allow_inf=False):
    value = float(value)
    if np.isnan(value) or (np.isinf(value) and not allow_inf):
        raise DomainError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise DomainError(f"{name} must be {bound}, got {value}")
    return value


def check_fraction(value, name):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_unit_vector(vec, name="vector", atol=1e-12):
    v = np.asarray(vec, dtype=float)
    if v.shape != (3,):
        raise DomainError(f"{name} must be a 3-vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or abs(norm - 1.0) > atol:
        raise DomainError(f"{name} must have unit norm, got |{name}| = {norm!r}")
    return v


def normalize(vec):
    """Return ``vec`` scaled to unit length (for user-facing convenience)."""
    v = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise DomainError("cannot normalize a zero or non-finite vector")
    return v / norm


def check_increasing(x, name="frequencies", min_length=2):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.size < min_length:
        raise DomainError(f"{name} needs at least {min_length} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite values")
    if np.any(np.diff(x) <= 0):
        bad = int(np.argmax(np.diff(x) <= 0)) + 1
        raise DomainError(f"{name} must be strictly increasing (violated at index {bad})")
    return x


def check_xy(x, y, complex_ok=True, name="frequencies"):
    """Validate a sampled curve: increasing abscissa, matching finite ordinate."""
    x = check_increasing(x, name=name)
    y = np.asarray(y)
    if not complex_ok or not np.iscomplexobj(y):
        y = y.astype(float)
    if y.shape != x.shape:
        raise DomainError(f"data shape {y.shape} does not match {name} shape {x.shape}")
    if not np.all(np.isfinite(y)):
        raise DomainError("data contains non-finite values")
    return x, y
