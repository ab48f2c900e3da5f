"""Seeded samplers for the Monte Carlo experiments.

Every random stream is a PCG64 generator seeded by
``SeedSequence([seed, role, index...])``. A repetition therefore draws the
same numbers whatever order (or thread) it is evaluated in.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from .._validation import as_symmetric
from ..exceptions import ConfigInvalid, DataError, NotPositiveDefinite, WeightMismatch


class Role(enum.IntEnum):
    P_DATA = 0
    Q_DATA = 1
    P_RAW = 2
    Q_RAW = 3
    BOOTSTRAP = 4
    FAMILY = 5
    PILOT = 6
    DBAR_P = 7
    DBAR_Q = 8
    BASELINE = 9


def stream(seed, *keys):
    """Independent generator for ``(seed, *keys)``; keys are non-negative ints."""
    entropy = [int(seed) % 2 ** 64] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LOGNORMAL = "lognormal"
    DISCRETE = "discrete"


def _factor(sigma):
    """A matrix ``F`` with ``F F' = sigma``; Cholesky when PD, PSD root otherwise."""
    try:
        return linalg.cholesky(sigma)
    except NotPositiveDefinite:
        return linalg.sqrt_psd(sigma)


@dataclass(frozen=True)
class DistributionSpec:
    """Gaussian or log-normal law with parameters ``(mu, sigma)``, or a discrete law.

    A log-normal draw is ``exp(g)`` with ``g ~ N(mu, sigma)``. ``shell`` is an
    optional ``(C1, C2)`` pair restricting draws to the admissible shell by
    rejection.
    """

    family: Family
    mu: np.ndarray = None
    sigma: np.ndarray = None
    atoms: np.ndarray = None
    probs: np.ndarray = None
    shell: tuple = None
    _factor: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if family is Family.DISCRETE:
            atoms = np.asarray(self.atoms, dtype=float)
            if atoms.ndim == 1:
                atoms = atoms.reshape(-1, 1)
            if atoms.ndim != 2 or atoms.shape[0] == 0 or not np.all(np.isfinite(atoms)):
                raise DataError("discrete atoms must form a finite, non-empty (K, n) array")
            probs = np.full(len(atoms), 1.0 / len(atoms)) if self.probs is None else np.asarray(self.probs, float)
            if probs.shape != (len(atoms),) or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise WeightMismatch("discrete probabilities must be non-negative, one per atom, summing to 1")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "probs", probs)
            return
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = as_symmetric(self.sigma, "sigma")
        if sigma.shape[0] != mu.size:
            raise DataError(f"sigma is {sigma.shape} but mu has {mu.size} entries")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_factor", _factor(sigma))
        if self.shell is not None:
            c1, c2 = (float(c) for c in self.shell)
            if not 0 < c1 < c2:
                raise ConfigInvalid("shell constants need 0 < C1 < C2", "/shell")
            object.__setattr__(self, "shell", (c1, c2))

    @property
    def n(self):
        return self.atoms.shape[1] if self.family is Family.DISCRETE else self.mu.size

    def mean(self):
        """Exact mean (ignores any shell truncation)."""
        if self.family is Family.DISCRETE:
            return self.probs @ self.atoms
        if self.family is Family.GAUSSIAN:
            return self.mu.copy()
        return np.exp(self.mu + 0.5 * np.diag(self.sigma))

    def covariance(self):
        """Exact covariance (ignores any shell truncation)."""
        if self.family is Family.DISCRETE:
            c = self.atoms - self.mean()
            C = (c * self.probs[:, None]).T @ c
        elif self.family is Family.GAUSSIAN:
            C = self.sigma.copy()
        else:
            m = self.mean()
            C = np.outer(m, m) * np.expm1(self.sigma)
        return 0.5 * (C + C.T)

    def with_shell(self, C1, C2):
        return DistributionSpec(self.family, self.mu, self.sigma, self.atoms, self.probs, (C1, C2))

    def _raw(self, count, rng):
        if self.family is Family.DISCRETE:
            cdf = np.cumsum(self.probs)
            idx = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
            return self.atoms[np.minimum(idx, len(self.atoms) - 1)]
        G = self.mu + rng.standard_normal((count, self.n)) @ self._factor.T
        return G if self.family is Family.GAUSSIAN else np.exp(G)


MAX_REJECTION_ROUNDS = 1000


def sample(spec, count, rng):
    """Draw ``count`` observations as a (count, n) array.

    With a shell, rejected rows are replaced by fresh draws from the same
    generator; returns ``(X, n_rejected)`` in that case via :func:`sample_shell`.
    """
    if spec.shell is None:
        return spec._raw(count, rng)
    return sample_shell(spec, count, rng)[0]


def sample_shell(spec, count, rng):
    from ..portfolio import admissible_mask

    if spec.shell is None:
        return spec._raw(count, rng), 0
    c1, c2 = spec.shell
    out = np.empty((count, spec.n))
    filled = 0
    rejected = 0
    for _ in range(MAX_REJECTION_ROUNDS):
        X = spec._raw(count - filled, rng)
        ok = admissible_mask(X, c1, c2)
        k = int(ok.sum())
        out[filled:filled + k] = X[ok]
        filled += k
        rejected += len(X) - k
        if filled == count:
            return out, rejected
    raise ConfigInvalid("admissible shell rejects almost every draw; widen (C1, C2)", "/shell")


@dataclass(frozen=True)
class PerturbationFamily:
    """Laws with parameters ``(mu + alpha mu_dir, sigma + alpha sigma_dir)``."""

    base: DistributionSpec
    mu_dir: np.ndarray
    sigma_dir: np.ndarray
    alphas: tuple = tuple(np.round(np.linspace(0.0, 1.0, 11), 12))

    def __post_init__(self):
        if self.base.family is Family.DISCRETE:
            raise ConfigInvalid("perturbation families need a parametric base law", "/family")
        mu_dir = np.atleast_1d(np.asarray(self.mu_dir, dtype=float))
        sigma_dir = as_symmetric(self.sigma_dir, "sigma_dir")
        if mu_dir.shape != self.base.mu.shape or sigma_dir.shape != self.base.sigma.shape:
            raise ConfigInvalid("perturbation directions do not match the base dimension", "/family")
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas or any(not 0.0 <= a <= 1.0 for a in alphas):
            raise ConfigInvalid("alphas must be a non-empty grid in [0, 1]", "/alphas")
        for a in alphas:
            if not linalg.is_psd(self.base.sigma + a * sigma_dir):
                raise ConfigInvalid(f"sigma + {a} * sigma_dir is not PSD", "/family")
        object.__setattr__(self, "mu_dir", mu_dir)
        object.__setattr__(self, "sigma_dir", sigma_dir)
        object.__setattr__(self, "alphas", alphas)

    def at(self, alpha):
        b = self.base
        return DistributionSpec(b.family, b.mu + alpha * self.mu_dir, b.sigma + alpha * self.sigma_dir, shell=b.shell)

    @classmethod
    def random(cls, n, family, seed, alphas=None, shell=None):
        """Parameters from ``2n + 2`` standard normal vectors.

        ``mu = eta``, ``mu_dir = gamma``, ``sigma = (1/n) sum eta_i eta_i'``
        and ``sigma_dir = (1/n) sum gamma_i gamma_i'``.
        """
        rng = stream(seed, Role.FAMILY)
        eta, gamma = rng.standard_normal(n), rng.standard_normal(n)
        E, G = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        base = DistributionSpec(family, eta, E.T @ E / n, shell=shell)
        kwargs = {} if alphas is None else {"alphas": tuple(alphas)}
        return cls(base, gamma, G.T @ G / n, **kwargs)
