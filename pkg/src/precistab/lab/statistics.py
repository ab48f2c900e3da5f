"""Estimators applied to one dataset, and the transport distance between their laws."""

import enum
from dataclasses import dataclass

import numpy as np

from .. import estimators, linalg, portfolio, precision, transport
from ..exceptions import ConfigInvalid, Infeasible


class StatKind(str, enum.Enum):
    EIGENVALUES = "eigenvalues"
    COVARIANCE = "covariance"
    PRECISION = "precision"
    MEAN_AND_COV = "mean-and-cov"
    PORTFOLIO = "portfolio"


@dataclass(frozen=True)
class Statistic:
    """A statistic ``T_N`` together with the constants of its stability bound.

    ``lam`` is the precision penalty; ``z`` the portfolio target return;
    ``C1``/``C2`` the portfolio admissible-shell constants.
    """

    kind: StatKind
    centered: bool = True
    lam: float = None
    kappa: float = None
    z: float = None
    C1: float = None
    C2: float = None

    def __post_init__(self):
        kind = StatKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is StatKind.PRECISION and not (self.lam and self.lam > 0):
            raise ConfigInvalid("precision statistic needs lam > 0", "/statistic/lam")
        if kind is StatKind.PORTFOLIO:
            if self.z is None or self.z <= 0:
                raise ConfigInvalid("portfolio statistic needs a target return z > 0", "/statistic/z")
            if self.C1 is None or self.C2 is None or not 0 < self.C1 < self.C2:
                raise ConfigInvalid("portfolio statistic needs 0 < C1 < C2", "/statistic/C1")
            if not self.centered:
                raise ConfigInvalid("portfolio statistic uses the centered covariance", "/statistic/centered")
        if kind is StatKind.MEAN_AND_COV and not self.centered:
            raise ConfigInvalid("mean-and-cov statistic uses the centered covariance", "/statistic/centered")

    def _cov(self, X):
        return estimators.sample_cov_centered(X) if self.centered else estimators.sample_cov_uncentered(X)

    def kappa_for(self, n):
        if self.kappa is not None:
            return float(self.kappa)
        return precision.KAPPA_FACTOR * (n / self.lam) ** 2

    def apply(self, X):
        """Statistic value on dataset ``X``: an array (portfolio: 0-d)."""
        kind = self.kind
        if kind is StatKind.EIGENVALUES:
            return linalg.eigvalsh(self._cov(X))
        if kind is StatKind.COVARIANCE:
            return self._cov(X)
        if kind is StatKind.PRECISION:
            return precision.solve_precision(self.lam, self._cov(X)).s_star
        if kind is StatKind.MEAN_AND_COV:
            return np.concatenate([estimators.sample_mean(X), self._cov(X).ravel()])
        mu = estimators.sample_mean(X)
        return np.asarray(portfolio.value_v(mu, estimators.sample_cov_centered(X), self.z))

    def feasible(self, X):
        """Whether :meth:`apply` is defined on ``X`` (portfolio targets must be attainable)."""
        if self.kind is not StatKind.PORTFOLIO:
            return True
        mu = estimators.sample_mean(X)
        return bool(mu.min() <= self.z <= mu.max())

    def coordinates(self, n):
        """Labels of the reported distance rows."""
        if self.kind is StatKind.EIGENVALUES:
            return ["all"] + [f"lambda{i + 1}" for i in range(n)]
        return ["all"]

    def select(self, values, coordinate, n):
        """Atoms of one reported coordinate from stacked statistic values."""
        if coordinate == "all":
            return values
        return values[:, int(coordinate[len("lambda"):]) - 1]

    def distance(self, A, B, n):
        """Kantorovich distance between two stacked samples of this statistic."""
        A, B = np.asarray(A), np.asarray(B)
        if A.ndim == 1:
            return transport.w1_sorted_1d(A, B)
        if self.kind is StatKind.MEAN_AND_COV:
            return transport.w1_product((A[:, :n], A[:, n:]), (B[:, :n], B[:, n:]))
        return transport.w1_assignment(A, B)

    def lipschitz(self, coordinate):
        """Extra Lipschitz factor for a coordinate projection (1 for all cases here)."""
        return 1.0

    def constant(self, m_p, m_q, n):
        """Multiplier of ``d_2(P, Q)`` in the stability bound."""
        k = self.kind
        if k is StatKind.MEAN_AND_COV:
            return max(4.0, 2 * m_p, 2 * m_q)
        if k is StatKind.PORTFOLIO:
            return portfolio.lipschitz_const_L(self.C1, self.C2, n, self.z) * max(4.0, 2 * m_p, 2 * m_q)
        base = max(3.0, 2 * m_p, 2 * m_q) if self.centered else 2.0
        if k is StatKind.PRECISION:
            return self.kappa_for(n) * base
        return base


def apply_with_redraw(stat, draw, max_redraws=100):
    """Apply ``stat`` to ``draw()``, redrawing datasets on which it is undefined.

    Returns ``(value, n_redraws)``.
    """
    for redraws in range(max_redraws + 1):
        X = draw()
        if stat.feasible(X):
            return stat.apply(X), redraws
    raise Infeasible(f"statistic undefined on {max_redraws + 1} consecutive datasets", None)
