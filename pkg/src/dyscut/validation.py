"""Input validation helpers shared by the pipeline modules."""

from __future__ import annotations

import numpy as np


def as_float_matrix(x, name: str = "array") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite values."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")
    return a


def check_embeddings(x, name: str = "embeddings") -> np.ndarray:
    """Validate an (n_windows, dim) embedding matrix."""
    a = as_float_matrix(x, name)
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got {a.shape}")
    return a


def check_square(w, name: str = "matrix") -> np.ndarray:
    a = as_float_matrix(w, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def check_symmetric(w, tol: float = 1e-9, name: str = "matrix") -> np.ndarray:
    """Validate symmetry within an absolute tolerance. Returns the input unchanged."""
    a = check_square(w, name)
    if a.size:
        dev = np.abs(a - a.T).max()
        if dev > tol:
            raise ValueError(f"{name} is not symmetric: max |a - a.T| = {dev:.3e} > {tol:.1e}")
    return a


def check_unit_interval(v, name: str = "values") -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got range [{a.min()}, {a.max()}]")
    return a
