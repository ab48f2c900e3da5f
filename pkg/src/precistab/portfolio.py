"""Long-only Markowitz problem with a target return.

    v(mu, Sigma) = min 1/2 w' Sigma w  s.t.  w' mu = z, w' 1 = 1, w >= 0

solved exactly by enumerating active sets, which is affordable for the
small numbers of assets used here and yields certified multipliers.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from ._validation import as_symmetric
from .exceptions import (
    DegenerateMu,
    DimensionTooLarge,
    Infeasible,
    InvalidConstants,
    InvalidProblem,
    PreconditionViolated,
    ZeroSigma,
)

MAX_ASSETS = 20
FEAS_TOL = 1e-10
TIE_TOL = 1e-12
COND_LIMIT = 1e12


@dataclass(frozen=True)
class PortfolioProblem:
    mu: np.ndarray
    sigma: np.ndarray
    z: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise InvalidProblem("mu must be a finite vector")
        sigma = as_symmetric(self.sigma, "sigma")
        if sigma.shape[0] != mu.size:
            raise InvalidProblem(f"sigma is {sigma.shape} but mu has {mu.size} entries")
        if not linalg.is_psd(sigma):
            raise InvalidProblem("sigma must be positive semi-definite")
        z = float(self.z)
        if not np.isfinite(z):
            raise InvalidProblem("target return must be finite")
        if mu.size > MAX_ASSETS:
            raise DimensionTooLarge(f"exact enumeration supports at most {MAX_ASSETS} assets, got {mu.size}")
        lo, hi = float(mu.min()), float(mu.max())
        if not lo - FEAS_TOL <= z <= hi + FEAS_TOL:
            raise Infeasible(f"target {z!r} outside attainable returns [{lo!r}, {hi!r}]", (lo, hi))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "z", z)

    @property
    def n(self):
        return self.mu.size


@dataclass(frozen=True)
class PortfolioSolution:
    """Optimal weights, value and KKT multipliers.

    Stationarity reads ``Sigma w + lambda1 mu + lambda2 1 - s = 0``.
    """

    w: np.ndarray
    value: float
    lambda1: float
    lambda2: float
    s: np.ndarray
    active_set: tuple
    skipped: list = field(default_factory=list, repr=False)


def _solve_face(sigma, mu, z, free):
    k = len(free)
    K = np.zeros((k + 2, k + 2))
    K[:k, :k] = sigma[np.ix_(free, free)]
    K[:k, k] = K[k, :k] = mu[free]
    K[:k, k + 1] = K[k + 1, :k] = 1.0
    rhs = np.zeros(k + 2)
    rhs[k], rhs[k + 1] = z, 1.0
    singular = np.linalg.cond(K) > COND_LIMIT
    if singular:
        # minimum-norm multipliers; usable only if the system is consistent
        x = np.linalg.lstsq(K, rhs, rcond=1e-12)[0]
    else:
        x = np.linalg.solve(K, rhs)
    scale = max(1.0, float(np.max(np.abs(K))))
    if not np.all(np.isfinite(x)) or np.max(np.abs(K @ x - rhs)) > 1e-9 * scale:
        return None, singular
    return x, singular


def solve_markowitz(p):
    """Exact minimizer by enumeration of the set of zero weights."""
    n = p.n
    mu, sigma, z = p.mu, p.sigma, p.z
    best = None
    skipped = []
    for k in range(1, n + 1):
        for free in itertools.combinations(range(n), k):
            free = list(free)
            x, singular = _solve_face(sigma, mu, z, free)
            if x is None:
                skipped.append(tuple(sorted(set(range(n)) - set(free))))
                continue
            w = np.zeros(n)
            w[free] = x[:k]
            lam1, lam2 = float(x[k]), float(x[k + 1])
            if np.any(w < -FEAS_TOL):
                continue
            s = sigma @ w + lam1 * mu + lam2
            s[free] = 0.0
            scale = max(1.0, float(np.max(np.abs(sigma))), abs(lam1) * float(np.max(np.abs(mu))), abs(lam2))
            if np.any(s < -1e-9 * scale):
                continue
            w = np.maximum(w, 0.0)
            value = 0.5 * float(w @ sigma @ w)
            zero = tuple(sorted(set(range(n)) - set(free)))
            cand = (value, zero, w, lam1, lam2, np.maximum(s, 0.0))
            if best is None or value < best[0] - TIE_TOL or (abs(value - best[0]) <= TIE_TOL and zero < best[1]):
                best = cand
    if best is None:
        raise Infeasible("no active set satisfies the optimality conditions", (float(mu.min()), float(mu.max())))
    value, zero, w, lam1, lam2, s = best
    return PortfolioSolution(w=w, value=value, lambda1=lam1, lambda2=lam2, s=s, active_set=zero, skipped=skipped)


def value_v(mu, sigma, z):
    return solve_markowitz(PortfolioProblem(mu, sigma, z)).value


def lagrangian(p, sol, w=None):
    w = sol.w if w is None else np.asarray(w, dtype=float)
    return (
        0.5 * float(w @ p.sigma @ w)
        + sol.lambda1 * (float(w @ p.mu) - p.z)
        + sol.lambda2 * (float(w.sum()) - 1.0)
        - float(sol.s @ w)
    )


def dual_value(p, sol):
    """Dual function at the returned multipliers."""
    return -0.5 * float(sol.w @ p.sigma @ sol.w) - sol.lambda1 * p.z - sol.lambda2


def _check_constants(C1, C2):
    if not (np.isfinite(C1) and np.isfinite(C2) and 0 < C1 < C2):
        raise InvalidConstants(f"need 0 < C1 < C2, got C1={C1!r}, C2={C2!r}")


def lipschitz_const_L(C1, C2, n, z):
    """Lipschitz constant of ``v`` on the admissible parameter set."""
    _check_constants(C1, C2)
    if n < 1 or z < 0:
        raise InvalidConstants(f"need n >= 1 and z >= 0, got n={n!r}, z={z!r}")
    r = C2 ** 2 / C1 ** 2
    return 0.5 + 32.0 * r / 9.0 * (z + C2 / np.sqrt(n)) + 16.0 * r / (9.0 * np.sqrt(n))


def membership_admissible(x, C1, C2):
    """Whether ``sqrt(C1^2 + <x,1>^2/n) <= ||x|| <= C2``."""
    _check_constants(C1, C2)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    norm = float(np.linalg.norm(x))
    return bool(np.sqrt(C1 ** 2 + x.sum() ** 2 / x.size) <= norm <= C2)


def admissible_mask(X, C1, C2):
    """Row-wise :func:`membership_admissible` for an (M, n) array."""
    _check_constants(C1, C2)
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    return (np.sqrt(C1 ** 2 + X.sum(1) ** 2 / X.shape[1]) <= norms) & (norms <= C2)


def dual_multiplier_bound(mu, sigma, z):
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    if z < 0:
        raise PreconditionViolated(f"the multiplier bound needs a target return z >= 0, got {z!r}")
    spread = float(mu @ mu) - float(mu.sum()) ** 2 / n
    if spread <= 1e-14 * max(1.0, float(mu @ mu)):
        raise DegenerateMu("mu is (numerically) a multiple of the all-ones vector")
    s2 = linalg.norm_spec(sigma)
    if s2 == 0.0:
        raise ZeroSigma("sigma is the zero matrix")
    return 16.0 * s2 / (9.0 * spread) * (z + np.linalg.norm(mu) / np.sqrt(n)) + 8.0 * s2 / (9.0 * np.sqrt(n) * spread)


def dual_bound_check(p):
    """Return ``(|lambda1*|, bound)`` for the return-constraint multiplier."""
    bound = dual_multiplier_bound(p.mu, p.sigma, p.z)
    sol = solve_markowitz(p)
    return abs(sol.lambda1), float(bound)
