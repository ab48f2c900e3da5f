"""Dense symmetric linear algebra.

Cholesky-based routines (factor, log-determinant, inverse) delegate to
LAPACK through numpy/scipy. The symmetric eigensolver is a cyclic Jacobi
iteration, which returns orthonormal eigenvectors directly and is
accurate at the small dimensions this package targets.

All routines accept a :class:`SymMatrix` or a square array-like and
return plain ``numpy`` arrays; matrix outputs are exactly symmetric.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import as_symmetric
from .exceptions import DataError, NoConvergence, NotPositiveDefinite, NotPSD

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
PSD_CLAMP_RTOL = 1e-10


class SymMatrix:
    """Immutable symmetric matrix stored as its packed upper triangle.

    The dense form is materialized on demand and is symmetric by
    construction.

    >>> S = SymMatrix.from_dense([[2.0, 1.0], [1.0, 3.0]])
    >>> S.packed
    array([2., 1., 3.])
    """

    __slots__ = ("_n", "_packed")

    def __init__(self, n, packed):
        n = int(n)
        packed = np.array(packed, dtype=float).ravel()
        if n < 1:
            raise DataError("dimension must be a positive integer")
        if packed.size != n * (n + 1) // 2:
            raise DataError(f"expected {n * (n + 1) // 2} packed entries for n={n}, got {packed.size}")
        if not np.all(np.isfinite(packed)):
            raise DataError("SymMatrix entries must be finite")
        packed.setflags(write=False)
        self._n = n
        self._packed = packed

    @classmethod
    def from_dense(cls, A):
        A = as_symmetric(A)
        n = A.shape[0]
        return cls(n, A[np.triu_indices(n)])

    @classmethod
    def identity(cls, n):
        return cls.from_dense(np.eye(n))

    @classmethod
    def diag(cls, values):
        return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

    @property
    def n(self):
        return self._n

    @property
    def packed(self):
        return self._packed

    def to_dense(self):
        n = self._n
        A = np.zeros((n, n))
        iu = np.triu_indices(n)
        A[iu] = self._packed
        A.T[iu] = self._packed
        return A

    def __array__(self, dtype=None, copy=None):
        A = self.to_dense()
        return A if dtype is None else A.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._packed, other._packed)

    def __hash__(self):
        return hash((self._n, self._packed.tobytes()))

    def __repr__(self):
        return f"SymMatrix(n={self._n}, packed={self._packed.tolist()!r})"


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenvalues in descending order and matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def cholesky(A):
    """Lower-triangular ``L`` with ``L @ L.T == A``.

    Raises :class:`NotPositiveDefinite` when a pivot is not positive.
    """
    A = as_symmetric(A)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc


def is_pd(A):
    try:
        cholesky(A)
    except NotPositiveDefinite:
        return False
    return True


def logdet_pd(A):
    L = cholesky(A)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def inverse_pd(A):
    A = as_symmetric(A)
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(A.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def _off_norm(A):
    off = A - np.diag(np.diag(A))
    return float(np.sqrt(np.sum(off * off)))


def _canonical_signs(V):
    # largest-magnitude component of each eigenvector is made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def eigh(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Sweeps over all pairs ``p < q`` until the off-diagonal Frobenius mass
    drops below ``tol * ||A||_F``. Raises :class:`NoConvergence` after
    ``max_sweeps`` sweeps.
    """
    A = as_symmetric(A).copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = float(np.linalg.norm(A))
    threshold = tol * scale
    sweeps = 0
    while _off_norm(A) > threshold:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    # theta*theta would overflow; first-order root is exact here
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    return EigDecomposition(values=values[order], vectors=_canonical_signs(V[:, order]))


def eigvalsh(A):
    return eigh(A).values


def sqrt_psd(A, rtol=PSD_CLAMP_RTOL):
    """Symmetric PSD square root ``Q diag(sqrt(max(w, 0))) Q^T``.

    Eigenvalues below ``-rtol * ||A||_F`` raise :class:`NotPSD`; smaller
    negative values are treated as round-off and clamped to zero.
    """
    A = as_symmetric(A)
    dec = eigh(A)
    floor = -rtol * float(np.linalg.norm(A))
    if dec.values.size and dec.values[-1] < floor:
        raise NotPSD(f"matrix has eigenvalue {dec.values[-1]:.3e} below tolerance {floor:.3e}")
    root = np.sqrt(np.clip(dec.values, 0.0, None))
    R = (dec.vectors * root) @ dec.vectors.T
    return 0.5 * (R + R.T)


def is_psd(A, rtol=PSD_CLAMP_RTOL):
    A = as_symmetric(A)
    return bool(eigh(A).values[-1] >= -rtol * float(np.linalg.norm(A)))


def inner(A, B):
    """Trace inner product ``tr(A^T B)``."""
    return float(np.sum(np.asarray(A, dtype=float) * np.asarray(B, dtype=float)))


def norm_fro(A):
    A = np.asarray(A if not hasattr(A, "to_dense") else A.to_dense(), dtype=float)
    return float(np.sqrt(np.sum(A * A)))


def norm_entry1(A):
    A = np.asarray(A if not hasattr(A, "to_dense") else A.to_dense(), dtype=float)
    return float(np.sum(np.abs(A)))


def norm_spec(A):
    values = eigh(A).values
    return float(np.max(np.abs(values)))
