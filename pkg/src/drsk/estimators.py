"""Point estimators of E_pi[f(X, Y)] from a (possibly biased) sample.

Six methods are provided: naive Monte Carlo, control functionals (CF), the
simplified CF (SimCF), capped black-box importance sampling (BBIS), the doubly
robust Stein-kernelized estimator (DRSK) and its data-reusing variant
(DRSK-R).  CF and DRSK split the data: the first ``m = floor(alpha n)``
records train the surrogate and the remainder is averaged or reweighted.

All kernel evaluations on a dataset go through :class:`SharedGram`, which
computes the full k0 Gram matrix once and memoizes surrogate fits and QP
solutions so several estimators on the same data share the work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import krr, qp
from .krr import KrrModel, LambdaRule
from .stein import SteinKernel

METHODS = ("naive", "cf", "simcf", "bbis", "drsk", "drsk_r")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    z: np.ndarray
    tag: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if np.asarray(self.x).ndim == 1:
            x = x.reshape(-1, 1)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if x.shape[0] != z.size:
            raise ValueError(f"x has {x.shape[0]} rows but z has {z.size} entries")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return int(self.z.size)


@dataclass
class EstimatorResult:
    estimate: float
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class QpSettings:
    tol: float = 1e-8
    max_iter: int = 50_000
    gap_rtol: Optional[float] = None


def split_size(n: int, alpha: float) -> int:
    """Training-block size ``floor(alpha n)`` for the split estimators."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    m = int(np.floor(alpha * n))
    if m < 1 or m >= n:
        raise ValueError(f"split m={m} is invalid for n={n}; need 1 <= m < n")
    return m


class SharedGram:
    """Lazily computed k0 Gram matrix of a dataset plus memoized fits and weights."""

    def __init__(self, data: Dataset, kernel: SteinKernel, qp_settings: QpSettings = QpSettings()):
        self.data = data
        self.kernel = kernel
        self.qp_settings = qp_settings
        self._K0 = None
        self._fits: dict = {}
        self._weights: dict = {}

    @property
    def K0(self) -> np.ndarray:
        if self._K0 is None:
            K0 = self.kernel.k0_matrix(self.data.x)
            self._K0 = 0.5 * (K0 + K0.T)
        return self._K0

    def surrogate(self, m: int, lam: float) -> KrrModel:
        key = (m, lam)
        if key not in self._fits:
            self._fits[key] = krr.fit(
                self.data.x[:m], self.data.z[:m], self.kernel, lam, Kplus=self.K0[:m, :m] + 1.0
            )
        return self._fits[key]

    def weights(self, start: int, B0: float) -> qp.WeightVector:
        """Capped-simplex weights on records ``start:`` with cap ``B0 / (n - start)``."""
        key = (start, B0)
        if key not in self._weights:
            block = self.K0[start:, start:]
            s = self.qp_settings
            self._weights[key] = qp.solve(
                block, B0 / block.shape[0], tol=s.tol, max_iter=s.max_iter, gap_rtol=s.gap_rtol
            )
        return self._weights[key]

    def adjusted(self, model: KrrModel, start: int) -> np.ndarray:
        """CF-adjusted values of records ``start:`` under a surrogate fit on ``:m``."""
        cross = self.K0[start:, : model.m]
        return krr.cf_adjust(model, self.data.x[start:], self.data.z[start:], cross_k0=cross)


def _shared(data: Dataset, kernel: SteinKernel, cache: Optional[SharedGram]) -> SharedGram:
    if cache is not None:
        if cache.data is not data:
            raise ValueError("shared Gram cache belongs to a different dataset")
        return cache
    return SharedGram(data, kernel)


def _weight_diagnostics(wv: qp.WeightVector) -> dict:
    return {
        "ksd": wv.ksd,
        "kkt_residual": wv.kkt_residual,
        "max_weight": wv.max_weight,
        "qp_converged": wv.converged,
        "qp_iterations": wv.iterations,
    }


def naive_mc(data: Dataset) -> EstimatorResult:
    if data.n == 0:
        raise ValueError("empty dataset")
    return EstimatorResult(float(np.mean(data.z)), "naive")


def cf_estimate(
    data: Dataset,
    kernel: SteinKernel,
    alpha: float = 0.5,
    lambda_rule: LambdaRule = LambdaRule(),
    *,
    cache: Optional[SharedGram] = None,
    model: Optional[KrrModel] = None,
) -> EstimatorResult:
    """Average of CF-adjusted samples over the held-out block.

    ``model`` replaces the fitted surrogate (used for ablations such as a
    zero surrogate).
    """
    m = split_size(data.n, alpha)
    sg = _shared(data, kernel, cache)
    if model is None:
        model = sg.surrogate(m, lambda_rule(m))
    fm = sg.adjusted(model, m)
    return EstimatorResult(
        float(np.mean(fm)), "cf", {"mu_s_m": krr.target_mean(model), "split_m": m}
    )


def simcf_estimate(
    data: Dataset,
    kernel: SteinKernel,
    lambda_rule: LambdaRule = LambdaRule(),
    *,
    cache: Optional[SharedGram] = None,
) -> EstimatorResult:
    """Known target mean of the surrogate fit on all records."""
    sg = _shared(data, kernel, cache)
    model = sg.surrogate(data.n, lambda_rule(data.n))
    mu = krr.target_mean(model)
    return EstimatorResult(mu, "simcf", {"mu_s_m": mu, "split_m": data.n})


def bbis_estimate(
    data: Dataset,
    kernel: SteinKernel,
    B0: float = 50.0,
    *,
    cache: Optional[SharedGram] = None,
) -> EstimatorResult:
    """KSD-optimal capped weights applied to the raw outputs."""
    sg = _shared(data, kernel, cache)
    wv = sg.weights(0, B0)
    return EstimatorResult(float(wv.w @ data.z), "bbis", _weight_diagnostics(wv))


def drsk_estimate(
    data: Dataset,
    kernel: SteinKernel,
    alpha: float = 0.5,
    lambda_rule: LambdaRule = LambdaRule(),
    B0: float = 50.0,
    *,
    cache: Optional[SharedGram] = None,
    weights: Optional[np.ndarray] = None,
    model: Optional[KrrModel] = None,
) -> EstimatorResult:
    """Capped KSD weights on the held-out block applied to CF-adjusted samples.

    ``weights`` and ``model`` override the solved weights and the fitted
    surrogate respectively, which is how the reductions to CF and to BBIS are
    exercised.
    """
    m = split_size(data.n, alpha)
    sg = _shared(data, kernel, cache)
    if model is None:
        model = sg.surrogate(m, lambda_rule(m))
    diag = {"mu_s_m": krr.target_mean(model), "split_m": m}
    if weights is None:
        wv = sg.weights(m, B0)
        w = wv.w
        diag.update(_weight_diagnostics(wv))
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size != data.n - m:
            raise ValueError(f"expected {data.n - m} weights, got {w.size}")
    fm = sg.adjusted(model, m)
    return EstimatorResult(float(w @ fm), "drsk", diag)


def drsk_reuse_estimate(
    data: Dataset,
    kernel: SteinKernel,
    lambda_rule: LambdaRule = LambdaRule(),
    B0: float = 50.0,
    *,
    cache: Optional[SharedGram] = None,
    weights: Optional[np.ndarray] = None,
) -> EstimatorResult:
    """DRSK with the surrogate and the weights both built from all records."""
    n = data.n
    sg = _shared(data, kernel, cache)
    model = sg.surrogate(n, lambda_rule(n))
    diag = {"mu_s_m": krr.target_mean(model), "split_m": n}
    if weights is None:
        wv = sg.weights(0, B0)
        w = wv.w
        diag.update(_weight_diagnostics(wv))
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
    fn = sg.adjusted(model, 0)
    return EstimatorResult(float(w @ fn), "drsk_r", diag)


@dataclass(frozen=True)
class Hyperparameters:
    alpha: float = 0.5
    lambda_rule: LambdaRule = LambdaRule()
    B0: float = 50.0
    qp: QpSettings = QpSettings()


def estimate(
    method: str, data: Dataset, kernel: SteinKernel, hyper: Hyperparameters = Hyperparameters(), cache=None
) -> EstimatorResult:
    """Dispatch one named method."""
    sg = cache if cache is not None else SharedGram(data, kernel, hyper.qp)
    if method == "naive":
        return naive_mc(data)
    if method == "cf":
        return cf_estimate(data, kernel, hyper.alpha, hyper.lambda_rule, cache=sg)
    if method == "simcf":
        return simcf_estimate(data, kernel, hyper.lambda_rule, cache=sg)
    if method == "bbis":
        return bbis_estimate(data, kernel, hyper.B0, cache=sg)
    if method == "drsk":
        return drsk_estimate(data, kernel, hyper.alpha, hyper.lambda_rule, hyper.B0, cache=sg)
    if method == "drsk_r":
        return drsk_reuse_estimate(data, kernel, hyper.lambda_rule, hyper.B0, cache=sg)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def run_methods(
    data: Dataset, kernel: SteinKernel, methods=METHODS, hyper: Hyperparameters = Hyperparameters()
) -> dict[str, EstimatorResult]:
    """Run several estimators on one dataset, sharing Gram blocks, fits and weights."""
    sg = SharedGram(data, kernel, hyper.qp)
    return {name: estimate(name, data, kernel, hyper, cache=sg) for name in methods}
