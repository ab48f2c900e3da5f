"""Sample statistics and their perturbation bounds."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import linalg
from ._validation import as_symmetric, check_same_shape, check_samples
from .exceptions import ShapeMismatch, TooShort

GAP_TOL = 1e-8


@dataclass(frozen=True)
class SampleSet:
    """N x n observations, one per row."""

    data: np.ndarray

    def __post_init__(self):
        X = check_samples(self.data, "data").copy()
        X.setflags(write=False)
        object.__setattr__(self, "data", X)

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_features(self):
        return self.data.shape[1]


def _data(s):
    return s.data if isinstance(s, SampleSet) else check_samples(s)


def sample_mean(s):
    return _data(s).mean(axis=0)


def sample_cov_uncentered(s):
    X = _data(s)
    C = X.T @ X / X.shape[0]
    return 0.5 * (C + C.T)


def sample_cov_centered(s):
    """Covariance with divisor N (not N - 1)."""
    X = _data(s)
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / X.shape[0]
    return 0.5 * (C + C.T)


def sample_eigvals(s, centered=True):
    C = sample_cov_centered(s) if centered else sample_cov_uncentered(s)
    return linalg.eigvalsh(C)


def _L2(x, y):
    return np.maximum(1.0, np.maximum(np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)))


def cov_data_lipschitz_check(a, b, centered=True):
    """Return ``(||Cov(a) - Cov(b)||_F, bound)`` for paired samples.

    The bound is ``(2/N) sum_i L2(a_i, b_i) ||a_i - b_i||`` plus, for the
    centered estimator, ``(1/N^2) sum_i (||a_i|| + ||b_i||) sum_j ||a_j - b_j||``,
    where ``L2(x, y) = max(1, ||x||, ||y||)``.
    """
    A, B = _data(a), _data(b)
    check_same_shape(A, B, ("a", "b"))
    N = A.shape[0]
    cov = sample_cov_centered if centered else sample_cov_uncentered
    lhs = linalg.norm_fro(cov(A) - cov(B))
    dist = np.linalg.norm(A - B, axis=1)
    rhs = 2.0 / N * float(np.sum(_L2(A, B) * dist))
    if centered:
        norms = np.linalg.norm(A, axis=1) + np.linalg.norm(B, axis=1)
        rhs += float(np.sum(norms)) * float(np.sum(dist)) / N ** 2
    return lhs, rhs


def _pair(A, B):
    A = as_symmetric(A, "A")
    B = as_symmetric(B, "B")
    if A.shape != B.shape:
        raise ShapeMismatch(f"A has shape {A.shape} but B has shape {B.shape}")
    return A, B


def eig_perturbation_check(A, B):
    """Return ``(max_i |lambda_i(A) - lambda_i(B)|, ||A - B||_F)``."""
    A, B = _pair(A, B)
    dev = float(np.max(np.abs(linalg.eigvalsh(A) - linalg.eigvalsh(B))))
    return dev, linalg.norm_fro(A - B)


def eigvec_davis_kahan_check(A, B, i):
    """Eigenvector deviation against the gap-based bound, for 0-based index ``i``.

    Returns ``(dev, bound, applicable)``. ``applicable`` is False when
    eigenvalue ``i`` of ``A`` is within ``1e-8`` of a neighbour; ``dev`` and
    ``bound`` are then ``nan``.
    """
    A, B = _pair(A, B)
    n = A.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"eigen-index {i} out of range for n={n}")
    da, db = linalg.eigh(A), linalg.eigh(B)
    w = da.values
    above = w[i - 1] - w[i] if i > 0 else np.inf
    below = w[i] - w[i + 1] if i < n - 1 else np.inf
    gap = min(above, below)
    if gap <= GAP_TOL:
        return float("nan"), float("nan"), False
    va, vb = da.vectors[:, i], db.vectors[:, i]
    if va @ vb < 0:
        vb = -vb
    dev = float(np.linalg.norm(va - vb))
    bound = 2 ** 1.5 * linalg.norm_spec(A - B) / gap
    return dev, float(bound), True


def spectral_gap(values):
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise TooShort("spectral gap needs at least two eigenvalues")
    return float(values[0] - values[1])


class SampleCovariance(BaseEstimator):
    """Empirical covariance (divisor N) with its descending spectrum.

    Parameters
    ----------
    centered : bool, default=True
        Subtract the sample mean; False gives the raw second-moment matrix.

    Attributes
    ----------
    location_, covariance_, eigenvalues_, eigenvectors_
    """

    def __init__(self, centered=True):
        self.centered = centered

    def fit(self, X, y=None):
        X = _data(X)
        self.location_ = sample_mean(X) if self.centered else np.zeros(X.shape[1])
        self.covariance_ = sample_cov_centered(X) if self.centered else sample_cov_uncentered(X)
        dec = linalg.eigh(self.covariance_)
        self.eigenvalues_ = dec.values
        self.eigenvectors_ = dec.vectors
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def spectral_gap_(self):
        return spectral_gap(self.eigenvalues_)
