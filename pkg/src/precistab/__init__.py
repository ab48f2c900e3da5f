"""Sparse precision estimation and distributional stability of covariance-based estimators."""

from .estimators import SampleCovariance, SampleSet
from .exceptions import DataError, NumericalError, PrecistabError
from .portfolio import PortfolioProblem, solve_markowitz
from .precision import PrecisionProblem, SparsePrecision, solve, solve_precision
from .transport import EmpiricalMeasure, fm2_upper, w1_assignment

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "EmpiricalMeasure",
    "NumericalError",
    "PortfolioProblem",
    "PrecisionProblem",
    "PrecistabError",
    "SampleCovariance",
    "SampleSet",
    "SparsePrecision",
    "fm2_upper",
    "solve",
    "solve_markowitz",
    "solve_precision",
    "w1_assignment",
]
