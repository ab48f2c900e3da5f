"""Monte Carlo harness for pushforward stability experiments."""

from .experiment import ExperimentConfig, StabilityReport, run_stability_experiment
from .sampling import DistributionSpec, Family, PerturbationFamily

__all__ = [
    "DistributionSpec",
    "ExperimentConfig",
    "Family",
    "PerturbationFamily",
    "StabilityReport",
    "run_stability_experiment",
]
