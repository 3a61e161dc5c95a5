"""Parallel Metropolis-Hastings: n independent chains started from the prior.

Each chain runs a fixed number of random-walk steps and only its endpoint is
kept, so the endpoints are independent but follow a biased law whenever the
budget is too short for the chains to mix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import ScoredTarget
from .rng import make_rng


@dataclass(frozen=True)
class ParallelMhConfig:
    target: ScoredTarget
    prior_sampler: Callable[[np.random.Generator, int], np.ndarray]
    proposal_sd: object  # scalar or per-coordinate vector
    iterations: int = 50
    n: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if np.any(np.asarray(self.proposal_sd, dtype=float) <= 0):
            raise ValueError("proposal_sd must be positive")
        if self.n < 1:
            raise ValueError("need at least one chain")


def _log_target(target: ScoredTarget, x: np.ndarray) -> np.ndarray:
    """Unnormalized log density with -inf outside the open support."""
    out = np.full(x.shape[0], -np.inf)
    inside = target.support.contains(x)
    if np.any(inside):
        out[inside] = target.log_density_unnorm(x[inside])
    return out


def _run(config: ParallelMhConfig):
    d = config.target.dim
    T = int(config.iterations)
    sd = np.broadcast_to(np.asarray(config.proposal_sd, dtype=float), (d,))
    x = np.empty((config.n, d))
    steps = np.empty((config.n, T, d))
    logu = np.empty((config.n, T))
    # every chain draws from its own stream so chain i depends on (seed, i) only
    for i in range(config.n):
        rng = make_rng(config.seed, i)
        x[i] = np.asarray(config.prior_sampler(rng, 1), dtype=float).reshape(d)
        steps[i] = rng.standard_normal((T, d))
        logu[i] = np.log(rng.random(T))
    if not np.all(config.target.support.contains(x)):
        raise ValueError("prior sampler produced points outside the target support")
    logp = _log_target(config.target, x)
    accepted = 0
    for t in range(T):
        prop = x + sd * steps[:, t]
        logp_prop = _log_target(config.target, prop)
        with np.errstate(invalid="ignore"):
            accept = logu[:, t] < logp_prop - logp
        x[accept] = prop[accept]
        logp[accept] = logp_prop[accept]
        accepted += int(accept.sum())
    return x, accepted


def parallel_mh(config: ParallelMhConfig) -> np.ndarray:
    """Endpoints of ``config.n`` independent chains, shape ``(n, d)``."""
    return _run(config)[0]


def acceptance_rate(config: ParallelMhConfig) -> float:
    """Fraction of accepted proposals over all chains and iterations."""
    if config.iterations == 0:
        raise ValueError("acceptance rate is undefined without iterations")
    _, accepted = _run(config)
    return accepted / (config.n * config.iterations)
