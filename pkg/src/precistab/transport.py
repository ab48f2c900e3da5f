"""Transport distances between equal-weight empirical measures.

Atoms may be scalars, vectors or symmetric matrices. With equal atom
counts the optimal coupling is a permutation, so Kantorovich (W1) and the
weighted order-2 transport cost reduce to a linear assignment problem,
solved exactly by ``scipy.optimize.linear_sum_assignment``.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import linalg
from ._validation import as_symmetric
from .exceptions import EmptyInput, KindMismatch, SizeMismatch

CHUNK = 512


class AtomKind(str, enum.Enum):
    SCALAR = "scalar"
    VECTOR = "vector"
    MATRIX = "matrix"


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform weights on ``atoms``, stored as an array of shape (M, ...)."""

    atoms: np.ndarray
    kind: AtomKind

    @classmethod
    def scalars(cls, values):
        return cls(_finite(np.asarray(values, dtype=float).reshape(-1)), AtomKind.SCALAR)

    @classmethod
    def vectors(cls, values):
        X = np.asarray(values, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise KindMismatch(f"vector atoms must form an (M, n) array, got shape {X.shape}")
        return cls(_finite(X), AtomKind.VECTOR)

    @classmethod
    def matrices(cls, values):
        mats = [as_symmetric(A, "atom") for A in values]
        if not mats:
            raise EmptyInput("empirical measure needs at least one atom")
        if len({A.shape for A in mats}) != 1:
            raise KindMismatch("matrix atoms have different dimensions")
        return cls(np.stack(mats), AtomKind.MATRIX)

    @classmethod
    def from_array(cls, values):
        """Infer the kind from the array rank: 1 scalar, 2 vector, 3 matrix."""
        X = np.asarray(values, dtype=float)
        if X.ndim <= 1:
            return cls.scalars(X)
        if X.ndim == 2:
            return cls.vectors(X)
        if X.ndim == 3:
            return cls.matrices(X)
        raise KindMismatch(f"cannot interpret an array of ndim={X.ndim} as atoms")

    def __post_init__(self):
        if len(self.atoms) == 0:
            raise EmptyInput("empirical measure needs at least one atom")

    def __len__(self):
        return len(self.atoms)

    @property
    def flat(self):
        """Atoms as rows of an (M, d) array; Frobenius becomes Euclidean."""
        return self.atoms.reshape(len(self.atoms), -1)


def _finite(X):
    if X.size == 0:
        raise EmptyInput("empirical measure needs at least one atom")
    if not np.all(np.isfinite(X)):
        raise KindMismatch("atoms must be finite")
    return X


class GroundMetric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    FROBENIUS = "frobenius"
    # max{1, |x|, |y|} |x - y|; a cost, not a metric
    WEIGHTED_FM2 = "weighted-fm2"


def _as_measure(a):
    return a if isinstance(a, EmpiricalMeasure) else EmpiricalMeasure.from_array(a)


def _compatible(a, b, equal_size=True):
    a, b = _as_measure(a), _as_measure(b)
    if a.kind != b.kind or a.atoms.shape[1:] != b.atoms.shape[1:]:
        raise KindMismatch(
            f"cannot compare {a.kind.value} atoms of shape {a.atoms.shape[1:]} "
            f"with {b.kind.value} atoms of shape {b.atoms.shape[1:]}"
        )
    if equal_size and len(a) != len(b):
        raise SizeMismatch(f"atom counts differ: {len(a)} vs {len(b)}")
    return a, b


def cost_matrix(x, y, metric=GroundMetric.EUCLIDEAN):
    """Pairwise costs between rows of ``x`` (M, d) and ``y`` (K, d)."""
    metric = GroundMetric(metric)
    sq = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
    D = np.sqrt(np.maximum(sq, 0.0))
    # the expansion loses accuracy for nearby points; recompute those exactly
    close = sq <= 1e-6 * np.maximum(1.0, (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :])
    if np.any(close):
        i, j = np.nonzero(close)
        D[i, j] = np.linalg.norm(x[i] - y[j], axis=1)
    if metric is GroundMetric.WEIGHTED_FM2:
        nx = np.linalg.norm(x, axis=1)[:, None]
        ny = np.linalg.norm(y, axis=1)[None, :]
        D = np.maximum(1.0, np.maximum(nx, ny)) * D
    return D


def assignment_cost(C):
    """Minimum-cost perfect matching value of a square cost matrix."""
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].sum())


def w1_sorted_1d(a, b):
    a, b = _compatible(a, b)
    if a.kind is not AtomKind.SCALAR:
        raise KindMismatch("w1_sorted_1d needs scalar atoms")
    return float(np.mean(np.abs(np.sort(a.atoms) - np.sort(b.atoms))))


def w1_assignment(a, b, metric=None):
    """Kantorovich distance between equal-size empirical measures.

    ``metric`` defaults to Frobenius for matrix atoms and Euclidean
    otherwise (the two coincide after flattening).
    """
    a, b = _compatible(a, b)
    if metric is None:
        metric = GroundMetric.FROBENIUS if a.kind is AtomKind.MATRIX else GroundMetric.EUCLIDEAN
    C = cost_matrix(a.flat, b.flat, metric)
    return assignment_cost(C) / len(a)


def fm2_upper(a, b):
    """Transport upper bound on the order-2 Fortet-Mourier distance."""
    return w1_assignment(a, b, GroundMetric.WEIGHTED_FM2)


def _dictionary(X, order):
    # columns: test functions evaluated at each row of X
    norms = np.linalg.norm(X, axis=1)
    feats = [X, norms[:, None]]
    if order == 2:
        iu = np.triu_indices(X.shape[1], k=1)
        feats.append((X[:, :, None] * X[:, None, :])[:, iu[0], iu[1]])
        # squares have slope 2|x_i|, hence the halving
        feats.append(0.5 * X * X)
        feats.append(0.5 * norms[:, None] ** 2)
        for c in (0.5, 1.0, 2.0, 4.0):
            # Huber profile of the norm: slope min(r, c) <= max(1, r)
            feats.append(np.where(norms <= c, 0.5 * norms ** 2, c * norms - 0.5 * c * c)[:, None])
    return np.hstack(feats)


def fm_lower_dictionary(a, b, order=2):
    """Lower bound on ``d_order`` from a fixed dictionary of admissible test functions.

    Coordinates and the norm are 1-Lipschitz; products ``x_i x_j`` (i < j),
    halved squares and Huber profiles of the norm satisfy
    ``|f(x) - f(y)| <= max(1, |x|, |y|) |x - y|``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    a, b = _compatible(a, b, equal_size=False)
    diff = _dictionary(a.flat, order).mean(0) - _dictionary(b.flat, order).mean(0)
    return float(np.max(np.abs(diff)))


def dbar2_mc(xs, ys, chunk=CHUNK):
    """Mean of ``max(1, |x|, |y|) |x - y|`` over all pairs of atoms."""
    a, b = _compatible(xs, ys, equal_size=False)
    X, Y = a.flat, b.flat
    total = 0.0
    for start in range(0, len(X), chunk):
        total += float(cost_matrix(X[start:start + chunk], Y, GroundMetric.WEIGHTED_FM2).sum())
    return total / (len(X) * len(Y))


def gaussian_w2(mu1, sigma1, mu2, sigma2):
    """Quadratic Wasserstein distance between two Gaussian laws."""
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    sigma1 = as_symmetric(sigma1, "sigma1")
    sigma2 = as_symmetric(sigma2, "sigma2")
    if mu1.shape != mu2.shape or sigma1.shape != sigma2.shape or sigma1.shape[0] != mu1.size:
        raise KindMismatch("Gaussian parameters have inconsistent dimensions")
    r1 = linalg.sqrt_psd(sigma1)
    linalg.sqrt_psd(sigma2)  # PSD check only
    if np.array_equal(mu1, mu2) and np.array_equal(sigma1, sigma2):
        return 0.0
    cross = linalg.sqrt_psd(r1 @ sigma2 @ r1)
    sq = float(np.sum((mu1 - mu2) ** 2)) + float(np.trace(sigma1 + sigma2 - 2.0 * cross))
    return float(np.sqrt(max(sq, 0.0)))


def w1_product(parts_a, parts_b):
    """W1 on product atoms under the sum of per-component Euclidean costs.

    ``parts_a`` and ``parts_b`` are sequences of (M, ...) arrays, one per
    component; atom ``i`` of a measure is the tuple of row ``i`` of each.
    """
    if len(parts_a) != len(parts_b) or not parts_a:
        raise KindMismatch("product measures need the same non-empty list of components")
    C = 0.0
    M = None
    for pa, pb in zip(parts_a, parts_b):
        a, b = _compatible(EmpiricalMeasure.from_array(pa), EmpiricalMeasure.from_array(pb))
        if M is not None and len(a) != M:
            raise SizeMismatch("components have different atom counts")
        M = len(a)
        C = C + cost_matrix(a.flat, b.flat)
    return assignment_cost(C) / M


def discrete_transport(xa, wa, xb, wb, metric=GroundMetric.EUCLIDEAN):
    """Optimal transport cost between weighted discrete measures (exact LP)."""
    from scipy.optimize import linprog

    xa = np.asarray(xa, dtype=float).reshape(len(wa), -1)
    xb = np.asarray(xb, dtype=float).reshape(len(wb), -1)
    wa = np.asarray(wa, dtype=float)
    wb = np.asarray(wb, dtype=float)
    C = cost_matrix(xa, xb, metric)
    K, L = C.shape
    A_eq = np.zeros((K + L, K * L))
    for i in range(K):
        A_eq[i, i * L:(i + 1) * L] = 1.0
    for j in range(L):
        A_eq[K + j, j::L] = 1.0
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([wa, wb]), bounds=(0, None), method="highs")
    if res.status != 0:
        raise KindMismatch(f"transport LP failed: {res.message}")
    return float(res.fun)
