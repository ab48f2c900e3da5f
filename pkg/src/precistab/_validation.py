"""Input validation helpers shared by all modules."""

import numbers

import numpy as np

from .exceptions import DataError, EmptyInput, ShapeMismatch

SYMMETRY_RTOL = 1e-10


def as_symmetric(A, name="A", rtol=SYMMETRY_RTOL):
    """Return ``A`` as a dense float array that equals its transpose exactly.

    Accepts a :class:`~precistab.linalg.SymMatrix` or any square array-like.
    Asymmetry beyond ``rtol * max(1, max|A|)`` is rejected rather than
    silently averaged away.
    """
    if hasattr(A, "to_dense"):
        return A.to_dense()
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"{name} must be a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise EmptyInput(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise DataError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > rtol * scale:
        raise DataError(f"{name} is not symmetric")
    return 0.5 * (A + A.T)


def check_same_shape(A, B, names=("A", "B")):
    if A.shape != B.shape:
        raise ShapeMismatch(f"{names[0]} has shape {A.shape} but {names[1]} has shape {B.shape}")


def check_samples(X, name="X"):
    """Validate an observation matrix (rows are observations)."""
    if hasattr(X, "data") and not isinstance(X, np.ndarray):
        X = X.data
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D (observations x features), got ndim={X.ndim}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise EmptyInput(f"{name} has no observations")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} has non-finite entries")
    return X


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise DataError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise DataError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise DataError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
