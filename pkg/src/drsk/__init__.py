"""Doubly robust Stein-kernelized Monte Carlo estimators and an experiment harness."""

from .distributions import (
    NoiseModel,
    OutOfSupportError,
    ScoredTarget,
    Support,
    beta_conjugate_posterior,
    beta_product,
    gamma_conjugate_posterior,
    gamma_product,
    gaussian_iso,
    gaussian_mixture_product,
    student_t_product,
)
from .estimators import METHODS, Dataset, EstimatorResult, Hyperparameters, QpSettings, run_methods
from .krr import KrrModel, LambdaRule
from .qp import InfeasibleCapError, WeightVector
from .rng import make_rng
from .stein import SteinKernel, gram, median_bandwidth

__version__ = "0.1.0"

__all__ = [
    "METHODS",
    "Dataset",
    "EstimatorResult",
    "Hyperparameters",
    "InfeasibleCapError",
    "KrrModel",
    "LambdaRule",
    "NoiseModel",
    "OutOfSupportError",
    "QpSettings",
    "ScoredTarget",
    "SteinKernel",
    "Support",
    "WeightVector",
    "beta_conjugate_posterior",
    "beta_product",
    "gamma_conjugate_posterior",
    "gamma_product",
    "gaussian_iso",
    "gaussian_mixture_product",
    "gram",
    "make_rng",
    "median_bandwidth",
    "run_methods",
    "student_t_product",
]
