"""Product-form target distributions with score functions, plus noise models.

Every target is stored by its unnormalized log-density and its score
``grad log p``; normalizing constants are never needed.  Points are arrays of
shape ``(n, d)`` (a single point of shape ``(d,)`` is also accepted and the
result is squeezed accordingly).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .rng import as_rng


class Support(str, enum.Enum):
    FULL = "full-space"
    POSITIVE = "positive-orthant"
    UNIT_CUBE = "unit-cube"

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Row-wise strict-interior membership test for an ``(n, d)`` array."""
        x = np.atleast_2d(x)
        if self is Support.FULL:
            return np.all(np.isfinite(x), axis=1)
        if self is Support.POSITIVE:
            return np.all(x > 0, axis=1)
        return np.all((x > 0) & (x < 1), axis=1)


class OutOfSupportError(ValueError):
    """Raised when a score or density is requested outside the open support."""


@dataclass(frozen=True)
class ScoredTarget:
    """A distribution on R^d known up to normalization.

    ``log_density_unnorm`` and ``score`` are vectorized over rows.  The
    marginal parameter arrays are kept for quadrature-based ground truths.
    """

    name: str
    dim: int
    support: Support
    log_density_unnorm: Callable[[np.ndarray], np.ndarray]
    score: Callable[[np.ndarray], np.ndarray]
    exact_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    params: dict = field(default_factory=dict)
    # per-coordinate unnormalized log-density, ``(n, d) -> (n, d)``
    marginal_logpdf: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def sample(self, n: int, seed) -> np.ndarray:
        if self.exact_sampler is None:
            raise ValueError(f"target {self.name!r} has no exact sampler")
        return self.exact_sampler(as_rng(seed), int(n))


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    arr = arr.reshape(1, -1) if single else arr
    if arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr, single


def _product_target(name, dim, support, marg_logpdf, marg_score, sampler, params):
    """Assemble a ScoredTarget from per-coordinate elementwise functions."""

    def check(x):
        ok = support.contains(x)
        if not np.all(ok):
            bad = x[~ok][0]
            raise OutOfSupportError(f"{name}: point {bad} is outside the open {support.value}")

    def log_density(x):
        pts, single = _as_points(x, dim)
        check(pts)
        out = marg_logpdf(pts).sum(axis=1)
        return out[0] if single else out

    def score(x):
        pts, single = _as_points(x, dim)
        check(pts)
        out = marg_score(pts)
        return out[0] if single else out

    def marginal_logpdf(x):
        pts, _ = _as_points(x, dim)
        return marg_logpdf(pts)

    return ScoredTarget(
        name=name,
        dim=dim,
        support=support,
        log_density_unnorm=log_density,
        score=score,
        exact_sampler=sampler,
        params=params,
        marginal_logpdf=marginal_logpdf,
    )


def _broadcast(values, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 1:
        arr = np.full(dim, arr[0])
    if arr.size != dim:
        raise ValueError(f"{what} must have length 1 or {dim}, got {arr.size}")
    return arr


def gaussian_iso(mean=0.0, dim: int = 1, sd=1.0) -> ScoredTarget:
    """Independent Gaussian coordinates; unit variance by default."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    mu = _broadcast(mean, dim, "mean")
    sd = _broadcast(sd, dim, "sd")
    if np.any(sd <= 0):
        raise ValueError("standard deviations must be positive")
    var = sd**2

    def sampler(rng, n):
        return mu + sd * rng.standard_normal((n, dim))

    return _product_target(
        "gaussian",
        dim,
        Support.FULL,
        lambda x: -0.5 * (x - mu) ** 2 / var,
        lambda x: (mu - x) / var,
        sampler,
        {"mean": mu.tolist(), "sd": sd.tolist()},
    )


def gaussian_mixture_product(weights, means, variances, dim: int) -> ScoredTarget:
    """Each coordinate is an independent draw from the same 1-d Gaussian mixture."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    mu = np.asarray(means, dtype=float).reshape(-1)
    var = np.asarray(variances, dtype=float).reshape(-1)
    if not (w.size == mu.size == var.size):
        raise ValueError("weights, means and variances must have equal length")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
        raise ValueError("mixture weights must be nonnegative and sum to 1")
    if np.any(var <= 0):
        raise ValueError("mixture variances must be positive")
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    sd = np.sqrt(var)

    def component_logs(x):
        # (n, d, K)
        diff = x[..., None] - mu
        return logw - 0.5 * np.log(var) - 0.5 * diff**2 / var, diff

    def logpdf(x):
        comp, _ = component_logs(x)
        return logsumexp(comp, axis=-1)

    def score(x):
        comp, diff = component_logs(x)
        resp = np.exp(comp - logsumexp(comp, axis=-1, keepdims=True))
        return np.sum(resp * (-diff / var), axis=-1)

    def sampler(rng, n):
        labels = rng.choice(w.size, size=(n, dim), p=w)
        return mu[labels] + sd[labels] * rng.standard_normal((n, dim))

    return _product_target(
        "gaussian_mixture",
        dim,
        Support.FULL,
        logpdf,
        score,
        sampler,
        {"weights": w.tolist(), "means": mu.tolist(), "variances": var.tolist()},
    )


def student_t_product(dof: float, loc: float = 0.0, scale: float = 1.0, dim: int = 1) -> ScoredTarget:
    """Location-scale Student t in each coordinate."""
    if dof <= 0 or scale <= 0:
        raise ValueError("dof and scale must be positive")

    def logpdf(x):
        r = (x - loc) / scale
        return -0.5 * (dof + 1.0) * np.log1p(r * r / dof)

    def score(x):
        r = x - loc
        return -(dof + 1.0) * r / (dof * scale**2 + r * r)

    def sampler(rng, n):
        return loc + scale * rng.standard_t(dof, size=(n, dim))

    return _product_target(
        "student_t",
        dim,
        Support.FULL,
        logpdf,
        score,
        sampler,
        {"dof": float(dof), "loc": float(loc), "scale": float(scale)},
    )


def gamma_product(shapes, rates) -> ScoredTarget:
    """Independent Gamma(shape_i, rate_i) coordinates on the positive orthant."""
    a = np.asarray(shapes, dtype=float).reshape(-1)
    b = np.asarray(rates, dtype=float).reshape(-1)
    if a.size != b.size or a.size == 0:
        raise ValueError("shapes and rates must be nonempty and of equal length")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("Gamma shapes and rates must be positive")
    dim = a.size

    def sampler(rng, n):
        return rng.gamma(a, 1.0 / b, size=(n, dim))

    return _product_target(
        "gamma",
        dim,
        Support.POSITIVE,
        lambda x: (a - 1.0) * np.log(x) - b * x,
        lambda x: (a - 1.0) / x - b,
        sampler,
        {"shapes": a.tolist(), "rates": b.tolist()},
    )


def beta_product(alphas, betas) -> ScoredTarget:
    """Independent Beta(alpha_i, beta_i) coordinates on the open unit cube."""
    a = np.asarray(alphas, dtype=float).reshape(-1)
    b = np.asarray(betas, dtype=float).reshape(-1)
    if a.size != b.size or a.size == 0:
        raise ValueError("alphas and betas must be nonempty and of equal length")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("Beta parameters must be positive")
    dim = a.size

    def sampler(rng, n):
        return rng.beta(a, b, size=(n, dim))

    return _product_target(
        "beta",
        dim,
        Support.UNIT_CUBE,
        lambda x: (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x),
        lambda x: (a - 1.0) / x - (b - 1.0) / (1.0 - x),
        sampler,
        {"alphas": a.tolist(), "betas": b.tolist()},
    )


def gamma_conjugate_posterior(L: int, sums, prior_shape=2.0, prior_rate=2.0, obs_shape=4.0) -> ScoredTarget:
    """Posterior of Gamma-distributed rates under a Gamma(obs_shape, x) likelihood.

    With ``L`` observations per coordinate summing to ``sums[i]`` the posterior
    is Gamma(obs_shape*L + prior_shape, sums[i] + prior_rate).
    """
    sums = np.asarray(sums, dtype=float).reshape(-1)
    return gamma_product(np.full(sums.size, obs_shape * L + prior_shape), sums + prior_rate)


def beta_conjugate_posterior(L: int, successes, prior_alpha=1.0, prior_beta=1.0) -> ScoredTarget:
    """Posterior of Bernoulli success probabilities under a Beta prior."""
    s = np.asarray(successes, dtype=float).reshape(-1)
    if np.any(s < 0) or np.any(s > L):
        raise ValueError("success counts must lie in [0, L]")
    return beta_product(s + prior_alpha, L - s + prior_beta)


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    """Additive simulation noise Y given x.

    ``kind`` is one of ``none``, ``gaussian`` (N(0, sigma^2)) or
    ``gaussian_linear`` (N(0, sigma^2) + coef . x).  The same model is used
    under the target and under the sampler, so the conditional law of the
    noise never shifts with the input distribution.
    """

    kind: str = "none"
    sigma: float = 0.0
    coef: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "gaussian_linear"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        if self.kind == "gaussian_linear" and len(self.coef) == 0:
            raise ValueError("gaussian_linear noise needs a coefficient vector")

    @property
    def variance(self) -> float:
        """Variance of the zero-mean Gaussian part."""
        return 0.0 if self.kind == "none" else self.sigma**2

    def sample(self, x: np.ndarray, seed) -> np.ndarray:
        """One noise realization per row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        if self.kind == "none":
            return np.zeros(n)
        rng = as_rng(seed)
        eps = self.sigma * rng.standard_normal(n)
        if self.kind == "gaussian_linear":
            eps = eps + x @ _broadcast(self.coef, x.shape[1], "coef")
        return eps

    def conditional_mean(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "gaussian_linear":
            return x @ _broadcast(self.coef, x.shape[1], "coef")
        return np.zeros(x.shape[0])


def apply_noise(model: NoiseModel, x, seed) -> float:
    """A single realization of the additive noise at point ``x``."""
    return float(model.sample(np.reshape(np.asarray(x, dtype=float), (1, -1)), seed)[0])
