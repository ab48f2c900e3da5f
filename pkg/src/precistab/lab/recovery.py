"""Edge recovery of a Gaussian graphical model by the sparse precision estimator."""

from dataclasses import dataclass

import numpy as np

from .. import estimators, linalg, precision, transport
from .._validation import as_symmetric
from ..exceptions import DataError
from .sampling import DistributionSpec, Family, Role, sample, stream


@dataclass
class RecoveryRow:
    N: int
    precision: float
    recall: float
    mean_error: float
    bound_rhs: float = float("nan")
    dK_contaminated: float = float("nan")


def _precision_recall(est, truth):
    tp = len(est & truth)
    prec = tp / len(est) if est else 1.0
    rec = tp / len(truth) if truth else 1.0
    return prec, rec


def graphical_recovery_experiment(true_S, N_grid, lam, tau, M, seed, contamination=None):
    """Precision/recall of ``edge_set(S_N, tau)`` against the edges of ``true_S``.

    Data are ``N(0, true_S^{-1})`` and the estimator uses the uncentered
    second-moment matrix. With ``contamination = (Q, kappa)`` for a law
    ``Q`` the rows also report the Kantorovich distance from the law of
    ``S_N`` under ``Q`` to the point mass at ``S*(lam, Sigma_P)`` and its
    bound ``2 kappa d2(P, Q) + kappa E_P ||Sigma_N - Sigma_P||`` with ``d2``
    replaced by its transport upper bound.
    """
    S = as_symmetric(true_S, "true_S")
    if not linalg.is_pd(S):
        raise DataError("true_S must be positive definite")
    n = S.shape[0]
    sigma = linalg.inverse_pd(S)
    P = DistributionSpec(Family.GAUSSIAN, np.zeros(n), sigma)
    truth = precision.edge_set(S, 0.0)
    target = precision.solve_precision(lam, sigma).s_star
    rows = []
    for j, N in enumerate(N_grid):
        precs, recs, errs, cov_errs = [], [], [], []
        for r in range(M):
            X = sample(P, int(N), stream(seed, Role.P_DATA, j, r))
            C = estimators.sample_cov_uncentered(X)
            est = precision.solve_precision(lam, C).s_star
            p, q = _precision_recall(precision.edge_set(est, tau), truth)
            precs.append(p)
            recs.append(q)
            errs.append(linalg.norm_fro(est - S))
            cov_errs.append(linalg.norm_fro(C - sigma))
        row = RecoveryRow(int(N), float(np.mean(precs)), float(np.mean(recs)), float(np.mean(errs)))
        if contamination is not None:
            Q, kappa = contamination
            dists = []
            for r in range(M):
                X = sample(Q, int(N), stream(seed, Role.Q_DATA, j, r))
                est = precision.solve_precision(lam, estimators.sample_cov_uncentered(X)).s_star
                dists.append(linalg.norm_fro(est - target))
            size = min(10 * int(N), 2000)
            Xp = sample(P, size, stream(seed, Role.P_RAW, j))
            Xq = sample(Q, size, stream(seed, Role.Q_RAW, j))
            d2 = transport.fm2_upper(Xp, Xq)
            row.dK_contaminated = float(np.mean(dists))
            row.bound_rhs = float(2 * kappa * d2 + kappa * np.mean(cov_errs))
        rows.append(row)
    return rows


def chain_precision(n, diag=2.0, off=0.5):
    """Tridiagonal precision matrix of a chain graph."""
    return diag * np.eye(n) + off * (np.eye(n, k=1) + np.eye(n, k=-1))
