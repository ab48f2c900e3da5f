"""Monte Carlo checks of the distributional stability bounds.

Each check draws ``M`` datasets of size ``N`` under ``P`` and under ``Q``,
measures the Kantorovich distance between the resulting laws of the
statistic, and compares it with ``C * d2(P, Q)``. Since ``d2`` itself is
not computable, the transport upper bound :func:`~precistab.transport.fm2_upper`
on raw samples replaces it; this keeps the inequality direction. A check
passes when ``lhs <= rhs + 3 * SE`` (bootstrap standard error of ``lhs``).
"""

from dataclasses import dataclass, field

import numpy as np

from .. import linalg, portfolio, precision, transport
from ..exceptions import AdmissibilityViolated, WeightMismatch
from .experiment import RAW_SIZE_CAP, bound_row, pushforward_values, raw_samples
from .sampling import DistributionSpec, Family, Role, sample_shell, stream
from .statistics import Statistic, StatKind

PILOT_SIZE = 1000


@dataclass
class CheckResult:
    lhs: float
    rhs: float
    se: float
    constant: float
    d2_upper: float
    m_p: float
    m_q: float
    passed: bool
    extra: dict = field(default_factory=dict)


def _raw_size(N, raw_size):
    return raw_size if raw_size is not None else min(10 * N, RAW_SIZE_CAP)


def _check(stat, P, Q, N, M, seed, raw_size=None, n_boot=20, n_jobs=1):
    n = P.n
    A, _, _ = pushforward_values(stat, P, N, M, seed, Role.P_DATA, n_jobs)
    B, _, _ = pushforward_values(stat, Q, N, M, seed, Role.Q_DATA, n_jobs)
    size = _raw_size(N, raw_size)
    Xp = raw_samples(P, size, seed, Role.P_RAW)
    Xq = raw_samples(Q, size, seed, Role.Q_RAW)
    row = bound_row(stat, A, B, Xp, Xq, n, seed, (0,), n_boot)
    res = CheckResult(
        lhs=row["dK_hat"],
        rhs=row["bound_rhs"],
        se=row["se"],
        constant=row["constant"],
        d2_upper=row["d2_upper"],
        m_p=row["m_p"],
        m_q=row["m_q"],
        passed=row["pass"],
    )
    return res, A, B


def verify_thm51(P, Q, N, M, seed, centered=True, **kw):
    """Covariance statistic; constant ``max(3, 2 m_P, 2 m_Q)`` (2 when uncentered)."""
    return _check(Statistic(StatKind.COVARIANCE, centered=centered), P, Q, N, M, seed, **kw)[0]


def verify_thm52(P, Q, N, M, seed, **kw):
    """Joint (mean, covariance) statistic under ``||mu|| + ||Sigma||_F``; constant ``max(4, ...)``."""
    return _check(Statistic(StatKind.MEAN_AND_COV), P, Q, N, M, seed, **kw)[0]


def verify_thm55(P, Q, N, M, seed, centered=True, **kw):
    """Sorted eigenvalue vector under the Euclidean metric."""
    return _check(Statistic(StatKind.EIGENVALUES, centered=centered), P, Q, N, M, seed, **kw)[0]


def verify_thm53(P, Q, N, M, seed, lam, kappa=None, centered=True, **kw):
    """Precision statistic with constant ``kappa * max(3, ...)`` (``2 kappa`` uncentered).

    Also checks the nested inequality ``W1(precision laws) <= kappa * W1(covariance laws)``
    on the same datasets, which holds exactly up to solver tolerance.
    """
    n = P.n
    stat = Statistic(StatKind.PRECISION, centered=centered, lam=lam, kappa=kappa)
    cov_stat = Statistic(StatKind.COVARIANCE, centered=centered)
    n_jobs = kw.get("n_jobs", 1)
    Cp, _, _ = pushforward_values(cov_stat, P, N, M, seed, Role.P_DATA, n_jobs)
    Cq, _, _ = pushforward_values(cov_stat, Q, N, M, seed, Role.Q_DATA, n_jobs)
    A = np.stack([precision.solve_precision(lam, C).s_star for C in Cp])
    B = np.stack([precision.solve_precision(lam, C).s_star for C in Cq])
    size = _raw_size(N, kw.get("raw_size"))
    Xp = raw_samples(P, size, seed, Role.P_RAW)
    Xq = raw_samples(Q, size, seed, Role.Q_RAW)
    row = bound_row(stat, A, B, Xp, Xq, n, seed, (0,), kw.get("n_boot", 20))
    k = stat.kappa_for(n)
    cov_lhs = transport.w1_assignment(Cp, Cq)
    # slack covers solver tolerance: KKT residual 1e-7 per atom
    nested_slack = 1e-6 * k
    return CheckResult(
        lhs=row["dK_hat"],
        rhs=row["bound_rhs"],
        se=row["se"],
        constant=row["constant"],
        d2_upper=row["d2_upper"],
        m_p=row["m_p"],
        m_q=row["m_q"],
        passed=row["pass"],
        extra={
            "kappa": k,
            "cov_lhs": cov_lhs,
            "nested_pass": bool(row["dK_hat"] <= k * cov_lhs + nested_slack),
        },
    )


def _moments(spec):
    if spec.family is not Family.DISCRETE:
        raise WeightMismatch("exact moments need discrete laws")
    return spec.mean(), spec.covariance()


def verify_prop82(P, Q):
    """``||Sigma_P - Sigma_Q||_F`` against ``n d2 + sqrt(n)(||mu_P|| + ||mu_Q||) d1``.

    Both laws are discrete; ``d1`` is computed exactly and ``d2`` is
    replaced by its exact transport upper bound. Returns ``(lhs, rhs_upper)``.
    """
    if P.n != Q.n:
        raise WeightMismatch("laws live in different dimensions")
    mu_p, S_p = _moments(P)
    mu_q, S_q = _moments(Q)
    n = P.n
    d1 = transport.discrete_transport(P.atoms, P.probs, Q.atoms, Q.probs)
    d2 = transport.discrete_transport(P.atoms, P.probs, Q.atoms, Q.probs, transport.GroundMetric.WEIGHTED_FM2)
    lhs = linalg.norm_fro(S_p - S_q)
    rhs = n * d2 + np.sqrt(n) * (np.linalg.norm(mu_p) + np.linalg.norm(mu_q)) * d1
    return float(lhs), float(rhs)


@dataclass
class ConsistencyResult:
    N_grid: list
    errors: list
    dK: list
    bounds: list
    slope: float
    rows_pass: bool
    passed: bool


SLOPE_THRESHOLD = -0.35


def verify_consistency(P, statistic, N_grid, M, seed, lam=None, kappa=None, centered=True, n_jobs=1):
    """Decay of ``E_N = E ||T_N - target||`` over ``N_grid``.

    ``statistic`` is ``"covariance"`` (target the true covariance, bound
    ``E ||Sigma_N - Sigma_P||``) or ``"precision"`` (target
    ``S*(lam, Sigma_P)``, bound ``kappa E ||Sigma_N - Sigma_P||``). ``dK`` is
    the Kantorovich distance of the law of ``T_N`` to the point mass at the
    target, computed row-wise from the same datasets as the bound.
    """
    kind = StatKind(statistic)
    n = P.n
    sigma_true = P.covariance()
    cov_stat = Statistic(StatKind.COVARIANCE, centered=centered)
    if kind is StatKind.PRECISION:
        target = precision.solve_precision(lam, sigma_true).s_star
        k = kappa if kappa is not None else precision.KAPPA_FACTOR * (n / lam) ** 2
    elif kind is StatKind.COVARIANCE:
        target, k = sigma_true, 1.0
    else:
        raise ValueError("statistic must be 'covariance' or 'precision'")
    errors, dKs, bounds = [], [], []
    for j, N in enumerate(N_grid):
        C, _, _ = pushforward_values(cov_stat, P, int(N), M, seed, Role.P_DATA + 10 * (j + 1), n_jobs)
        cov_err = np.array([linalg.norm_fro(c - sigma_true) for c in C])
        if kind is StatKind.PRECISION:
            T = np.stack([precision.solve_precision(lam, c).s_star for c in C])
        else:
            T = C
        err = np.array([linalg.norm_fro(t - target) for t in T])
        # Kantorovich distance to a point mass is the mean distance
        errors.append(float(err.mean()))
        dKs.append(float(err.mean()))
        bounds.append(float(k * cov_err.mean()))
    logN = np.log(np.asarray(N_grid, dtype=float))
    E = np.asarray(errors)
    if np.all(E == 0):
        slope = float("-inf")
    else:
        slope = float(np.polyfit(logN, np.log(np.maximum(E, 1e-300)), 1)[0])
    rows_pass = all(d <= b * (1 + 1e-9) + 1e-6 * k for d, b in zip(dKs, bounds))
    return ConsistencyResult(
        N_grid=list(N_grid),
        errors=errors,
        dK=dKs,
        bounds=bounds,
        slope=slope,
        rows_pass=bool(rows_pass),
        passed=bool(rows_pass and slope <= SLOPE_THRESHOLD),
    )


def check_admissible(spec, C1, C2, seed, size=PILOT_SIZE):
    """Raise unless a pilot sample lies entirely in the admissible shell."""
    X, _ = sample_shell(spec, size, stream(seed, Role.PILOT))
    mask = portfolio.admissible_mask(X, C1, C2)
    if not mask.all():
        raise AdmissibilityViolated(
            f"{int((~mask).sum())} of {size} pilot draws fall outside the admissible shell"
        )


def verify_portfolio_bound(P, Q, N, M, seed, z, C1, C2, truncate=True, **kw):
    """Optimal-value statistic against ``L_{C1,C2} max(4, 2 m_P, 2 m_Q) d2``.

    With ``truncate`` the laws are restricted to the admissible shell by
    rejection; otherwise a pilot sample must already be admissible.
    """
    if truncate:
        P, Q = P.with_shell(C1, C2), Q.with_shell(C1, C2)
    else:
        check_admissible(P, C1, C2, seed)
        check_admissible(Q, C1, C2, seed + 1)
    stat = Statistic(StatKind.PORTFOLIO, z=z, C1=C1, C2=C2)
    res, A, B = _check(stat, P, Q, N, M, seed, **kw)
    res.extra["L"] = portfolio.lipschitz_const_L(C1, C2, P.n, z)
    return res


def random_discrete(rng, n, K, scale=1.0):
    """Uniform discrete law on ``K`` standard normal atoms, for property sweeps."""
    return DistributionSpec(Family.DISCRETE, atoms=scale * rng.standard_normal((K, n)))


__all__ = [
    "CheckResult",
    "ConsistencyResult",
    "check_admissible",
    "verify_consistency",
    "verify_portfolio_bound",
    "verify_prop82",
    "verify_thm51",
    "verify_thm52",
    "verify_thm53",
    "verify_thm55",
]
