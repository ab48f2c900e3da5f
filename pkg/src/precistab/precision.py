"""Sparse precision-matrix estimation by l1-penalized log-determinant minimization.

The estimator minimizes

    L(S) = <Sigma, S> - log det S + lam * ||S||_1

over positive definite ``S``, where ``||S||_1`` sums the absolute values of
*all* entries (diagonal included). :func:`solve` runs proximal gradient
with Barzilai-Borwein trial steps and Cholesky-guarded backtracking;
:func:`solve_smoothed` minimizes the smoothed surrogate with
``|x| -> sqrt(x^2 + eps)`` and serves as an independent cross-check.
The remaining functions evaluate, on concrete inputs, the inequalities
known about the minimizer (l1 cap, Lipschitz dependence on ``Sigma``,
strong monotonicity of ``S -> -S^{-1}``, quadratic/linear growth).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning

from . import linalg
from ._validation import as_symmetric, check_positive, check_random_state, check_samples
from .exceptions import (
    InvalidProblem,
    KappaTooSmall,
    NotPositiveDefinite,
    PreconditionViolated,
)

ZERO_THRESHOLD = 1e-10
KAPPA_FACTOR = 1.01
POLISH_EVERY = 25
PSD_RTOL = 1e-10
# predicted decrease below this (relative) is float noise
DECREMENT_RTOL = 1e-14


@dataclass(frozen=True)
class PrecisionProblem:
    """Penalty weight ``lam > 0`` and a PSD input covariance ``sigma``."""

    lam: float
    sigma: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise InvalidProblem(f"penalty weight must satisfy lam > 0, got {self.lam!r}")
        sigma = as_symmetric(self.sigma, "sigma")
        if not linalg.is_psd(sigma, rtol=PSD_RTOL):
            raise InvalidProblem("sigma must be positive semi-definite")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self):
        return self.sigma.shape[0]

    @property
    def ell1_cap(self):
        """Upper bound ``n / lam`` on ``||S*||_1``."""
        return self.n / self.lam

    def default_kappa(self):
        return KAPPA_FACTOR * self.ell1_cap ** 2


@dataclass
class PrecisionSolveReport:
    s_star: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    tol: float
    trace: list = field(default_factory=list, repr=False)


def _as_problem(p, sigma=None):
    if isinstance(p, PrecisionProblem):
        return p
    return PrecisionProblem(p, sigma)


def soft_threshold(A, thresh):
    return np.sign(A) * np.maximum(np.abs(A) - thresh, 0.0)


def _smooth_part(sigma, S):
    """``<Sigma, S> - log det S``; raises NotPositiveDefinite off the cone."""
    return linalg.inner(sigma, S) - linalg.logdet_pd(S)


def objective(p, S):
    S = as_symmetric(S, "S")
    return _smooth_part(p.sigma, S) + p.lam * linalg.norm_entry1(S)


def _kkt_from_gradient(G, S, lam):
    nonzero = np.abs(S) > ZERO_THRESHOLD
    res = np.where(nonzero, np.abs(G + lam * np.sign(S)), np.maximum(0.0, np.abs(G) - lam))
    return float(np.max(res))


def kkt_residual(p, S):
    """Distance of 0 from ``Sigma - S^{-1} + lam * d||S||_1`` in the max norm."""
    S = as_symmetric(S, "S")
    G = p.sigma - linalg.inverse_pd(S)
    return _kkt_from_gradient(G, S, p.lam)


def initial_point(p):
    return np.diag(1.0 / (np.diag(p.sigma) + p.lam))


def _bb_step(D, dG, fallback):
    sy = linalg.inner(D, dG)
    if sy <= 0 or not np.isfinite(sy):
        return fallback
    return float(np.clip(linalg.inner(D, D) / sy, 1e-12, 1e12))


def _polish(p, S, iters=30):
    """Newton iterations on the smooth problem with support and signs of ``S`` frozen.

    Returns the polished point, or None if it left the PD cone or flipped a sign.
    """
    lam, sigma = p.lam, p.sigma
    n = p.n
    support = np.abs(S) > ZERO_THRESHOLD
    Z = np.sign(S) * support
    idx = np.flatnonzero(support.ravel())
    C = sigma + lam * Z
    X = S.copy()
    for _ in range(iters):
        W = linalg.inverse_pd(X)
        g = (C - W).ravel()[idx]
        if np.max(np.abs(g)) <= 1e-14 * max(1.0, np.max(np.abs(C))):
            break
        H = np.kron(W, W)[np.ix_(idx, idx)]
        d = np.linalg.lstsq(H, -g, rcond=None)[0]
        D = np.zeros(n * n)
        D[idx] = d
        D = D.reshape(n, n)
        D = 0.5 * (D + D.T)
        step = 1.0
        while step > 1e-8:
            X_new = X + step * D
            if linalg.is_pd(X_new):
                break
            step *= 0.5
        else:
            return None
        X = X_new
    if np.any(np.sign(X[support]) != Z[support]):
        return None
    return X


def solve(p, tol=1e-7, max_iter=5000):
    """Minimize the penalized log-det objective by proximal gradient.

    Parameters
    ----------
    p : PrecisionProblem
    tol : float
        Stop once :func:`kkt_residual` is at most ``tol``.
    max_iter : int

    Returns
    -------
    PrecisionSolveReport
        ``converged`` is False (and a ``ConvergenceWarning`` issued) when
        ``max_iter`` is exhausted.
    """
    lam, sigma = p.lam, p.sigma
    S = initial_point(p)
    W = linalg.inverse_pd(S)
    G = sigma - W
    f = _smooth_part(sigma, S)
    # 1 / (local Lipschitz constant of the gradient) at S
    t = float(np.min(np.diag(S))) ** 2
    trace = []
    converged = False
    it = 0
    res = _kkt_from_gradient(G, S, lam)
    for it in range(max_iter + 1):
        trace.append((f + lam * linalg.norm_entry1(S), res))
        if res <= tol:
            converged = True
            break
        if it == max_iter:
            break
        while True:
            S_new = soft_threshold(S - t * G, lam * t)
            D = S_new - S
            try:
                f_new = _smooth_part(sigma, S_new)
            except NotPositiveDefinite:
                t *= 0.5
                continue
            if f_new <= f + linalg.inner(G, D) + linalg.inner(D, D) / (2.0 * t) + 1e-15 * abs(f):
                break
            t *= 0.5
            if t < 1e-20:
                break
        W_new = linalg.inverse_pd(S_new)
        G_new = sigma - W_new
        t = _bb_step(D, G_new - G, t)
        S, W, G, f = S_new, W_new, G_new, f_new
        res = _kkt_from_gradient(G, S, lam)
        if res > tol and it % POLISH_EVERY == POLISH_EVERY - 1:
            S_pol = _polish(p, S)
            if S_pol is not None:
                G_pol = sigma - linalg.inverse_pd(S_pol)
                res_pol = _kkt_from_gradient(G_pol, S_pol, lam)
                if res_pol < res:
                    S, G, res = S_pol, G_pol, res_pol
                    f = _smooth_part(sigma, S)
    if not converged:
        warnings.warn(
            f"proximal gradient stopped after {max_iter} iterations with KKT residual {res:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return PrecisionSolveReport(
        s_star=S,
        objective=f + lam * linalg.norm_entry1(S),
        kkt_residual=res,
        iterations=it,
        converged=converged,
        tol=tol,
        trace=trace,
    )


def solve_precision(lam, sigma, tol=1e-7, max_iter=5000):
    return solve(PrecisionProblem(lam, sigma), tol=tol, max_iter=max_iter)


def smoothed_penalty(S, eps):
    return float(np.sum(np.sqrt(S * S + eps)))


def smoothed_penalty_grad(S, eps):
    return S / np.sqrt(S * S + eps)


def objective_smoothed(p, S, eps):
    check_positive(eps, "eps")
    S = as_symmetric(S, "S")
    return _smooth_part(p.sigma, S) + p.lam * smoothed_penalty(S, eps)


def stationarity_smoothed(p, S, eps):
    """``Sigma - S^{-1} + lam * grad H_eps(S)``."""
    S = as_symmetric(S, "S")
    return p.sigma - linalg.inverse_pd(S) + p.lam * smoothed_penalty_grad(S, eps)


def solve_smoothed(p, eps, tol=1e-10, max_iter=5000):
    """Minimize the smoothed objective with damped Newton steps.

    The Newton system ``W D W + lam * h''(S) * D = -grad`` (``W = S^{-1}``)
    is solved in vectorized form; steps are halved until the trial point is
    positive definite and satisfies the Armijo condition. Stops when the
    Frobenius norm of the stationarity map is at most ``tol``, or when the
    Newton decrement shows that no decrease of the objective is resolvable
    in double precision (ill-conditioned Hessians at tiny ``eps``).
    """
    eps = check_positive(eps, "eps")
    lam, sigma = p.lam, p.sigma
    n = p.n
    S = initial_point(p)
    f = objective_smoothed(p, S, eps)
    trace = []
    converged = False
    it = 0
    for it in range(max_iter + 1):
        W = linalg.inverse_pd(S)
        grad = sigma - W + lam * smoothed_penalty_grad(S, eps)
        gnorm = linalg.norm_fro(grad)
        trace.append((f, gnorm))
        if gnorm <= tol:
            converged = True
            break
        if it == max_iter:
            break
        curv = lam * eps / (S * S + eps) ** 1.5
        H = np.kron(W, W) + np.diag(curv.ravel())
        D = np.linalg.solve(H, -grad.ravel()).reshape(n, n)
        D = 0.5 * (D + D.T)
        slope = linalg.inner(grad, D)
        if slope >= 0:
            D, slope = -grad, -gnorm * gnorm
        elif -slope <= DECREMENT_RTOL * max(1.0, abs(f)):
            converged = True
            break
        step = 1.0
        while True:
            S_new = S + step * D
            try:
                f_new = objective_smoothed(p, S_new, eps)
            except NotPositiveDefinite:
                step *= 0.5
                continue
            if f_new <= f + 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if f_new >= f and step < 1e-12:
            # no further decrease representable in floating point
            break
        S, f = S_new, f_new
    if not converged:
        warnings.warn(
            f"smoothed solver stopped after {it} iterations with gradient norm {gnorm:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return PrecisionSolveReport(
        s_star=S,
        objective=f,
        kkt_residual=gnorm,
        iterations=it,
        converged=converged,
        tol=tol,
        trace=trace,
    )


def smoothing_gap_bound(p, eps):
    """Uniform bound ``lam * n^2 * sqrt(eps)`` on ``|L - L_eps|``."""
    return p.lam * p.n ** 2 * np.sqrt(eps)


def lipschitz_check(lam, sigma1, sigma2, kappa=None, tol=1e-7):
    """Return ``(||S*(Sigma1) - S*(Sigma2)||_F, kappa * ||Sigma1 - Sigma2||_F)``."""
    p1 = PrecisionProblem(lam, sigma1)
    p2 = PrecisionProblem(lam, sigma2)
    threshold = p1.ell1_cap ** 2
    if kappa is None:
        kappa = KAPPA_FACTOR * threshold
    if kappa <= threshold:
        raise KappaTooSmall(f"kappa must exceed (n/lam)^2 = {threshold:.6g}, got {kappa!r}")
    s1 = solve(p1, tol=tol).s_star
    s2 = solve(p2, tol=tol).s_star
    lhs = linalg.norm_fro(s1 - s2)
    rhs = kappa * linalg.norm_fro(p1.sigma - p2.sigma)
    return lhs, rhs


def monotonicity_check(S1, S2, rho):
    """Return ``(-<S1^{-1} - S2^{-1}, S1 - S2>, rho * ||S1 - S2||_F^2)``.

    Both matrices must lie in the ball ``||S||_1 <= 1 / sqrt(rho)``.
    """
    rho = check_positive(rho, "rho")
    S1 = as_symmetric(S1, "S1")
    S2 = as_symmetric(S2, "S2")
    radius = 1.0 / np.sqrt(rho)
    for name, S in (("S1", S1), ("S2", S2)):
        if linalg.norm_entry1(S) > radius * (1 + 1e-12):
            raise PreconditionViolated(f"||{name}||_1 exceeds 1/sqrt(rho) = {radius:.6g}")
    dS = S1 - S2
    lhs = -linalg.inner(linalg.inverse_pd(S1) - linalg.inverse_pd(S2), dS)
    rhs = rho * linalg.inner(dS, dS)
    return lhs, rhs


@dataclass(frozen=True)
class GrowthProbe:
    alpha_hat: float
    beta_hat: float
    all_positive: bool
    min_increase: float
    n_used: int


def growth_probe(p, n_samples=200, rng_seed=0, s_star=None):
    """Empirical quadratic/linear growth rates of ``L`` around its minimizer.

    Draws unit-Frobenius symmetric directions ``D`` and step lengths ``t``
    log-spaced in ``[1e-3, 1]``; points that leave the PD cone are
    discarded. ``alpha_hat`` is the smallest ``(L(S) - L(S*)) / t^2`` with
    ``t <= 0.1``, ``beta_hat`` the smallest ``(L(S) - L(S*)) / t`` with
    ``t >= 0.5`` (``nan`` when no sample qualifies).
    """
    rng = check_random_state(rng_seed)
    if s_star is None:
        s_star = solve(p).s_star
    base = objective(p, s_star)
    ts = np.logspace(-3, 0, 13)
    alpha, beta = np.inf, np.inf
    min_inc = np.inf
    used = 0
    for _ in range(n_samples):
        B = rng.standard_normal((p.n, p.n))
        D = B + B.T
        D /= linalg.norm_fro(D)
        for t in ts:
            S = s_star + t * D
            try:
                inc = objective(p, S) - base
            except NotPositiveDefinite:
                continue
            used += 1
            min_inc = min(min_inc, inc)
            if t <= 0.1:
                alpha = min(alpha, inc / t ** 2)
            if t >= 0.5:
                beta = min(beta, inc / t)
    return GrowthProbe(
        alpha_hat=float(alpha) if np.isfinite(alpha) else float("nan"),
        beta_hat=float(beta) if np.isfinite(beta) else float("nan"),
        all_positive=bool(min_inc > -1e-9),
        min_increase=float(min_inc),
        n_used=used,
    )


def edge_set(S, tau=0.0):
    """Off-diagonal support ``{(i, j) : i < j, |S_ij| > tau}``."""
    check_positive(tau, "tau", strict=False)
    S = as_symmetric(S, "S")
    i, j = np.nonzero(np.triu(np.abs(S) > tau, k=1))
    return {(int(a), int(b)) for a, b in zip(i, j)}


class SparsePrecision(BaseEstimator):
    """Sparse inverse-covariance estimator with an sklearn-style interface.

    Parameters
    ----------
    lam : float, default=0.1
        Weight of the l1 penalty on all entries of the precision matrix.
    centered : bool, default=True
        Use the mean-centered sample covariance; with False the raw second
        moment matrix is used (appropriate for known zero mean).
    tol : float, default=1e-7
        KKT residual at which the solver stops.
    max_iter : int, default=5000
    eps : float or None, default=None
        If given, solve the smoothed problem with this smoothing parameter.

    Attributes
    ----------
    covariance_ : ndarray of shape (n_features, n_features)
    precision_ : ndarray of shape (n_features, n_features)
    location_ : ndarray of shape (n_features,)
    report_ : PrecisionSolveReport
    n_iter_ : int

    Examples
    --------
    >>> import numpy as np
    >>> X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]])
    >>> est = SparsePrecision(lam=0.5).fit(X)
    >>> np.round(est.precision_, 4)
    array([[1.    , 0.    ],
           [0.    , 0.4   ]])
    """

    def __init__(self, lam=0.1, centered=True, tol=1e-7, max_iter=5000, eps=None):
        self.lam = lam
        self.centered = centered
        self.tol = tol
        self.max_iter = max_iter
        self.eps = eps

    def fit(self, X, y=None):
        from .estimators import sample_cov_centered, sample_cov_uncentered, sample_mean

        X = check_samples(X)
        self.location_ = sample_mean(X) if self.centered else np.zeros(X.shape[1])
        cov = sample_cov_centered(X) if self.centered else sample_cov_uncentered(X)
        return self._fit_covariance(cov)

    def fit_covariance(self, covariance):
        """Fit directly from a covariance matrix instead of observations."""
        cov = as_symmetric(covariance, "covariance")
        self.location_ = np.zeros(cov.shape[0])
        return self._fit_covariance(cov)

    def _fit_covariance(self, cov):
        problem = PrecisionProblem(self.lam, cov)
        if self.eps is None:
            report = solve(problem, tol=self.tol, max_iter=self.max_iter)
        else:
            report = solve_smoothed(problem, self.eps, tol=self.tol, max_iter=self.max_iter)
        self.covariance_ = problem.sigma
        self.precision_ = report.s_star
        self.report_ = report
        self.n_iter_ = report.iterations
        self.n_features_in_ = cov.shape[0]
        return self

    def edges(self, tau=None):
        """Estimated graph edges; ``tau`` defaults to ``1e-3 * max|S_ij|``."""
        if tau is None:
            tau = 1e-3 * float(np.max(np.abs(self.precision_)))
        return edge_set(self.precision_, tau)

    def score(self, X, y=None):
        """Gaussian log-likelihood of ``X`` under the fitted precision (per sample, up to constants)."""
        from .estimators import sample_cov_centered, sample_cov_uncentered

        X = check_samples(X)
        cov = sample_cov_centered(X) if self.centered else sample_cov_uncentered(X)
        return 0.5 * (linalg.logdet_pd(self.precision_) - linalg.inner(cov, self.precision_))
