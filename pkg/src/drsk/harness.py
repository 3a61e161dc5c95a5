"""Replicated-estimation experiments: ground truth, empirical MSE, slopes, reports."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate, stats

from . import distributions as dist
from .config import ExperimentConfig, build_generator, build_integrand, build_noise
from .estimators import Dataset, SharedGram, estimate
from .rng import make_rng
from .stein import SteinKernel, median_bandwidth

log = logging.getLogger(__name__)

CSV_FIELDS = ("method", "n", "mse", "se", "estimate")


# ---------------------------------------------------------------------------
# ground truth


def ground_truth(
    target: dist.ScoredTarget,
    noise: dist.NoiseModel,
    integrand,
    N: int = 1_000_000,
    seed: int = 0,
    chunk: int = 100_000,
) -> tuple[float, float]:
    """Monte Carlo mean of ``f(X, Y)`` over ``N`` exact draws, with its standard error."""
    if target.exact_sampler is None:
        raise ValueError(f"target {target.name!r} has no exact sampler")
    if N < 2:
        raise ValueError("need N >= 2")
    rng_x, rng_y = make_rng(seed, 0), make_rng(seed, 1)
    sums, sq = [], []
    done = 0
    while done < N:
        k = min(chunk, N - done)
        x = target.sample(k, rng_x)
        z = integrand(x, rng_y) + noise.sample(x, rng_y)
        sums.append(math.fsum(z))
        sq.append(z)
        done += k
    mean = math.fsum(sums) / N
    var = math.fsum(float(np.sum((c - mean) ** 2)) for c in sq) / (N - 1)
    return mean, math.sqrt(var / N)


def _coordinate_moments(logpdf, support: dist.Support, t: float, center: float, scale: float):
    """``E[cos(tX)]``, ``E[sin(tX)]`` and ``E[X]`` for a 1-D density by adaptive quadrature.

    The density is integrated on a central window with oscillatory weights
    and on the tails with Fourier-integral rules, so heavy tails are handled.
    """
    lo_sup = 0.0 if support in (dist.Support.POSITIVE, dist.Support.UNIT_CUBE) else -np.inf
    hi_sup = 1.0 if support is dist.Support.UNIT_CUBE else np.inf
    a = max(center - 12 * scale, lo_sup)
    b = min(center + 12 * scale, hi_sup)
    peak = max(logpdf(np.linspace(a, b, 2001)))
    p = lambda x: float(np.exp(logpdf(np.array([x]))[0] - peak))  # noqa: E731

    def piece(weight=None, extra=None):
        f = p if extra is None else (lambda x: extra(x) * p(x))
        kw = dict(limit=500, epsabs=1e-14, epsrel=1e-12)
        total = 0.0
        if weight is None:
            total += integrate.quad(f, a, b, **kw)[0]
            if not np.isfinite(lo_sup):
                total += integrate.quad(f, -np.inf, a, **kw)[0]
            elif a > lo_sup:
                total += integrate.quad(f, lo_sup, a, **kw)[0]
            if not np.isfinite(hi_sup):
                total += integrate.quad(f, b, np.inf, **kw)[0]
            elif b < hi_sup:
                total += integrate.quad(f, b, hi_sup, **kw)[0]
            return total
        total += integrate.quad(f, a, b, weight=weight, wvar=t, limit=500)[0]
        if np.isfinite(lo_sup):
            if a > lo_sup:
                total += integrate.quad(f, lo_sup, a, weight=weight, wvar=t, limit=500)[0]
        else:
            # x -> -x maps (-inf, a] onto [-a, inf); sin is odd, cos even
            sign = -1.0 if weight == "sin" else 1.0
            total += sign * integrate.quad(lambda y: f(-y), -a, np.inf, weight=weight, wvar=t)[0]
        if np.isfinite(hi_sup):
            if b < hi_sup:
                total += integrate.quad(f, b, hi_sup, weight=weight, wvar=t, limit=500)[0]
        else:
            total += integrate.quad(f, b, np.inf, weight=weight, wvar=t)[0]
        return total

    z = piece()
    return piece("cos") / z, piece("sin") / z, piece(extra=lambda x: x) / z


def quadrature_ground_truth(target: dist.ScoredTarget, noise: dist.NoiseModel, integrand_spec: dict) -> float:
    """Exact-to-quadrature-accuracy mean for product targets and the trigonometric integrands.

    For ``f(x) = sin(pi mean(x))`` or ``cos(pi mean(x))`` the expectation is the
    imaginary or real part of the product of per-coordinate characteristic
    functions at ``pi / d``; linear noise adds ``coef . E[X]``.
    """
    if target.marginal_logpdf is None:
        raise ValueError(f"target {target.name!r} is not a product of known marginals")
    name = integrand_spec.get("name")
    d = target.dim
    t = np.pi / d
    # a cheap draw locates each marginal for the quadrature windows
    pilot = target.sample(20_000, make_rng(0, 99))
    phi = 1.0 + 0.0j
    means = np.empty(d)
    for i in range(d):
        lp = lambda x, i=i: target.marginal_logpdf(_embed(x, i, pilot[0]))[:, i]  # noqa: E731
        # boundary zeros of the density and tiny tolerance misses are expected here
        with np.errstate(divide="ignore", invalid="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            c, s, m = _coordinate_moments(lp, target.support, t, float(np.median(pilot[:, i])), float(pilot[:, i].std()))
        phi *= complex(c, s)
        means[i] = m
    if name == "sin_mean":
        theta = phi.imag
    elif name == "cos_mean":
        theta = phi.real
    elif name == "identity":
        theta = float(means.mean())
    elif name == "constant":
        theta = float(integrand_spec.get("value", 0.0))
    else:
        raise ValueError(f"no quadrature rule for integrand {name!r}")
    if noise.kind == "gaussian_linear":
        theta += float(np.broadcast_to(np.asarray(noise.coef, dtype=float), (d,)) @ means)
    return float(theta)


def _embed(x: np.ndarray, i: int, base: np.ndarray) -> np.ndarray:
    """Rows equal to ``base`` with coordinate ``i`` replaced by ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.tile(base, (x.size, 1))
    out[:, i] = x
    return out


def config_ground_truth(config: ExperimentConfig) -> tuple[float, float]:
    """Ground truth ``(theta, se)`` following the config's ``ground_truth`` block."""
    gt = config.ground_truth
    if "value" in gt:
        return float(gt["value"]), 0.0
    target = config.build_target()
    noise = build_noise(config.noise)
    method = gt.get("method", "mc")
    if method == "quadrature":
        return quadrature_ground_truth(target, noise, config.integrand), 0.0
    if method == "mc":
        seed = int(gt.get("seed", config.seed))
        return ground_truth(target, noise, build_integrand(config.integrand), int(gt.get("N", 1_000_000)), seed)
    raise ValueError(f"unknown ground-truth method {method!r}")


# ---------------------------------------------------------------------------
# slopes


def fit_slope(points) -> tuple[float, float]:
    """OLS slope of ``log mse`` on ``log n`` and its standard error."""
    pts = [(float(n), float(m)) for n, m in points]
    if len(pts) < 3:
        raise ValueError("need at least three (n, mse) points")
    if any(m <= 0 or not math.isfinite(m) for _, m in pts) or any(n <= 0 for n, _ in pts):
        raise ValueError("n and mse must be positive and finite")
    x = np.log([n for n, _ in pts])
    y = np.log([m for _, m in pts])
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.stderr)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Cell:
    """All repetitions of one (method, n) pair."""

    method: str
    n: int
    estimates: dict = field(default_factory=dict)  # rep -> estimate
    failures: dict = field(default_factory=dict)  # rep -> message
    qp_unconverged: int = 0

    def squared_errors(self, theta: float) -> np.ndarray:
        reps = sorted(self.estimates)
        return np.array([(self.estimates[r] - theta) ** 2 for r in reps])

    def summary(self, theta: float) -> dict:
        sq = self.squared_errors(theta)
        k = sq.size
        if k == 0:
            return {"mse": math.nan, "se": math.nan, "estimate": math.nan, "median_sq_error": math.nan}
        mse = math.fsum(sq) / k
        se = math.sqrt(math.fsum((sq - mse) ** 2) / (k - 1) / k) if k > 1 else math.nan
        est = math.fsum(self.estimates.values()) / k
        return {"mse": mse, "se": se, "estimate": est, "median_sq_error": float(np.median(sq))}


@dataclass
class MseReport:
    config: dict
    theta: float
    theta_se: float
    cells: dict  # (method, n) -> Cell

    @property
    def methods(self) -> list:
        return list(dict.fromkeys(m for m, _ in self.cells))

    def table(self) -> list[dict]:
        rows = []
        for (method, n), cell in self.cells.items():
            rows.append({"method": method, "n": n, **{k: v for k, v in cell.summary(self.theta).items() if k in CSV_FIELDS}})
        return rows

    def slopes(self) -> dict:
        out = {}
        for method in self.methods:
            pts = [(n, c.summary(self.theta)["mse"]) for (m, n), c in self.cells.items() if m == method]
            try:
                out[method] = fit_slope(pts)
            except ValueError:
                out[method] = None
        return out


def make_kernel(x: np.ndarray, target: dist.ScoredTarget, hyper: dict) -> SteinKernel:
    bw = hyper.get("bandwidth", "median")
    h2 = median_bandwidth(x) if bw == "median" else float(bw)
    return SteinKernel.for_target(target, h2 * float(hyper.get("bandwidth_scale", 1.0)))


def draw_dataset(config: ExperimentConfig, n: int, rep: int, target=None, generator=None, integrand=None, noise=None) -> Dataset:
    """The dataset shared by every method at grid point ``n``, repetition ``rep``."""
    target = target or config.build_target()
    generator = generator or build_generator(config.generator, target, config.seed)
    integrand = integrand or build_integrand(config.integrand)
    noise = noise or build_noise(config.noise)
    x = generator(n, (n, rep))
    rng_y = make_rng(config.seed, n, rep, 1)
    z = integrand(x, rng_y) + noise.sample(x, rng_y)
    return Dataset(x, z, {"n": n, "rep": rep})


def run_repetition(config: ExperimentConfig, n: int, rep: int, parts: Optional[dict] = None) -> dict:
    """Estimates (or error messages) of every method on one dataset."""
    parts = parts or {}
    hyper = config.hyperparameters()
    out = {}
    try:
        data = draw_dataset(config, n, rep, **parts)
        target = parts.get("target") or config.build_target()
        kernel = make_kernel(data.x, target, config.hyper)
        sg = SharedGram(data, kernel, hyper.qp)
    except Exception as exc:  # the whole repetition failed before any estimator ran
        msg = f"{type(exc).__name__}: {exc}"
        return {m: ("failed", msg) for m in config.methods}
    for method in config.methods:
        try:
            res = estimate(method, data, kernel, hyper, cache=sg)
            if not math.isfinite(res.estimate):
                raise FloatingPointError("non-finite estimate")
            out[method] = ("ok", res)
        except Exception as exc:
            out[method] = ("failed", f"{type(exc).__name__}: {exc}")
    return out


def run_experiment(config: ExperimentConfig, theta: Optional[tuple] = None, progress: bool = False) -> MseReport:
    """Replicated estimation over the whole grid.

    Repetition ``rep`` at grid point ``n`` uses seeds derived from
    ``(seed, n, rep)`` only, so every method sees the same data and the
    aggregate does not depend on the order in which cells are computed.
    """
    theta, theta_se = theta if theta is not None else config_ground_truth(config)
    target = config.build_target()
    parts = {
        "target": target,
        "generator": build_generator(config.generator, target, config.seed),
        "integrand": build_integrand(config.integrand),
        "noise": build_noise(config.noise),
    }
    cells = {(m, n): Cell(m, n) for m in config.methods for n in config.n_grid}
    for n in config.n_grid:
        for rep in range(config.repetitions):
            for method, (status, payload) in run_repetition(config, n, rep, parts).items():
                cell = cells[(method, n)]
                if status == "ok":
                    cell.estimates[rep] = payload.estimate
                    if payload.diagnostics.get("qp_converged") is False:
                        cell.qp_unconverged += 1
                else:
                    cell.failures[rep] = payload
                    log.warning("cell %s n=%d rep=%d failed: %s", method, n, rep, payload)
            if progress:
                log.info("n=%d rep=%d done", n, rep)
    return MseReport(config.to_dict(), theta, theta_se, cells)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(report: MseReport, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for row in report.table():
            w.writerow([_fmt(row[k]) for k in CSV_FIELDS])


def read_csv(path) -> list[dict]:
    """Parse a report CSV back into rows with typed fields."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path} is not a report CSV (header {reader.fieldnames})")
        return [
            {"method": r["method"], "n": int(r["n"]), "mse": float(r["mse"]), "se": float(r["se"]), "estimate": float(r["estimate"])}
            for r in reader
        ]


def slopes_from_rows(rows: list[dict]) -> dict:
    out = {}
    for method in dict.fromkeys(r["method"] for r in rows):
        pts = [(r["n"], r["mse"]) for r in rows if r["method"] == method]
        try:
            out[method] = fit_slope(pts)
        except ValueError:
            out[method] = None
    return out


def summary(report: MseReport) -> dict:
    cells = []
    for (method, n), cell in report.cells.items():
        s = cell.summary(report.theta)
        cells.append(
            {
                "method": method,
                "n": n,
                **s,
                "completed": len(cell.estimates),
                "failed": len(cell.failures),
                "failures": {str(k): v for k, v in sorted(cell.failures.items())},
                "qp_unconverged": cell.qp_unconverged,
            }
        )
    slopes = {m: (None if s is None else {"slope": s[0], "se": s[1]}) for m, s in report.slopes().items()}
    return {
        "seed": report.config["seed"],
        "theta": report.theta,
        "theta_se": report.theta_se,
        "slopes": slopes,
        "cells": cells,
        "config": report.config,
    }


def emit_report(report: MseReport, path, format: str = "both") -> list[Path]:
    """Write ``<path>/report.csv`` and/or ``<path>/summary.json``; returns the files written."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if format in ("csv", "both"):
        write_csv(report, out / "report.csv")
        written.append(out / "report.csv")
    if format in ("json", "both"):
        text = json.dumps(summary(report), indent=2, allow_nan=True)
        (out / "summary.json").write_text(text + "\n")
        written.append(out / "summary.json")
    if not written:
        raise ValueError(f"unknown report format {format!r}")
    return written
