"""Input validation helpers shared by estimators and operations."""

from __future__ import annotations

import numpy as np

from .exceptions import DomainError


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite 1-d float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def as_float_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-d float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    return alpha


def check_horizon(h: int) -> int:
    if int(h) != h or h < 1:
        raise DomainError(f"horizon must be a positive integer, got {h}")
    return int(h)


def check_symmetric(a: np.ndarray, name: str = "matrix", tol: float = 1e-8) -> np.ndarray:
    """Validate square symmetry within tolerance and return the array."""
    from .exceptions import CovarianceError

    a = as_float_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise CovarianceError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise CovarianceError(f"{name} is not symmetric")
    return a


def check_correlation(rho: float, name: str = "rho") -> float:
    rho = float(rho)
    if not np.isfinite(rho) or abs(rho) > 1.0:
        raise DomainError(f"{name} must lie in [-1, 1], got {rho}")
    return rho
