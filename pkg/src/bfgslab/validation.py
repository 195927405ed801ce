"""Input validation helpers shared across the package."""

import numpy as np

from .exceptions import ConfigError, InputError, SpdViolationError


def check_vector(x, d=None, name="x"):
    """Coerce to a finite 1-D float64 array, optionally of length d."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError(f"{name} must be a 1-D vector, got shape {x.shape}")
    if d is not None and x.shape[0] != d:
        raise InputError(f"{name} has length {x.shape[0]}, expected {d}")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains non-finite entries")
    return x


def check_square_matrix(A, d=None, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be square, got shape {A.shape}")
    if d is not None and A.shape[0] != d:
        raise InputError(f"{name} has size {A.shape[0]}, expected {d}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    return A


def check_spd(A, name="A"):
    """Validate symmetry and positive definiteness via Cholesky.

    Returns the Cholesky factor so callers can reuse it.
    """
    A = check_square_matrix(A, name=name)
    sym_tol = 1e-12 * max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > sym_tol:
        raise SpdViolationError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SpdViolationError(f"{name} is not positive definite") from exc


def check_positive(value, name):
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_in_open_interval(value, lo, hi, name):
    if not (lo < value < hi):
        raise ConfigError(f"{name} must lie in ({lo}, {hi}), got {value!r}")
    return float(value)
