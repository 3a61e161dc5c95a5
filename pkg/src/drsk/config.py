"""Declarative experiment descriptions and the objects they build.

An experiment is a JSON object; a config file holds either one experiment or
``{"presets": {name: experiment, ...}}``.  The built-in presets live in
``presets.json`` next to this module.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import distributions as dist
from . import simulators as sim
from .estimators import METHODS, Hyperparameters, QpSettings
from .krr import LambdaRule
from .mcmc import ParallelMhConfig, parallel_mh
from .rng import make_rng

DEFAULT_HYPER = {
    "alpha": 0.5,
    "lambda_multiplier": 0.01,
    "lambda_exponent": -0.5,
    "B0": 50.0,
    "bandwidth": "median",
    "bandwidth_scale": 1.0,
    "qp_tol": 1e-8,
    "qp_max_iter": 50_000,
    "qp_gap_rtol": None,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# targets


def build_target(spec: dict) -> dist.ScoredTarget:
    """Construct a target from ``{"family": ..., **params}``."""
    spec = dict(spec)
    family = spec.pop("family", None)
    try:
        if family == "gaussian":
            return dist.gaussian_iso(spec.get("mean", 0.0), int(spec["dim"]), spec.get("sd", 1.0))
        if family == "gaussian_mixture":
            return dist.gaussian_mixture_product(spec["weights"], spec["means"], spec["variances"], int(spec["dim"]))
        if family == "student_t":
            return dist.student_t_product(spec["dof"], spec.get("loc", 0.0), spec.get("scale", 1.0), int(spec["dim"]))
        if family == "gamma":
            return dist.gamma_product(spec["shapes"], spec["rates"])
        if family == "beta":
            return dist.beta_product(spec["alphas"], spec["betas"])
        if family == "gamma_conjugate":
            return dist.gamma_conjugate_posterior(
                spec["L"], spec["sums"], spec.get("prior_shape", 2.0), spec.get("prior_rate", 2.0), spec.get("obs_shape", 4.0)
            )
        if family == "beta_conjugate":
            return dist.beta_conjugate_posterior(
                spec["L"], spec["successes"], spec.get("prior_alpha", 1.0), spec.get("prior_beta", 1.0)
            )
        if family == "network_posterior":
            data = spec.get("data") or sim.INTERARRIVAL_SUMS[spec["setting"]]
            return sim.network_posterior(
                data, spec.get("L", 10), spec.get("prior_shape", 10.0), spec.get("prior_rate", 0.1),
                spec.get("includes_prior_rate", True),
            )
        if family == "mm1_posterior":
            return sim.mm1_posterior(spec["L"], spec["total_service_time"], spec.get("prior_shape", 2.0), spec.get("prior_rate", 1.0))
    except KeyError as exc:
        raise ConfigError(f"target family {family!r} is missing parameter {exc}") from None
    raise ConfigError(f"unknown target family {family!r}")


def prior_sd(target: dist.ScoredTarget) -> np.ndarray:
    """Per-coordinate standard deviation for the families used as MH priors."""
    p = target.params
    if target.name == "gamma":
        return np.sqrt(np.asarray(p["shapes"])) / np.asarray(p["rates"])
    if target.name == "beta":
        a, b = np.asarray(p["alphas"]), np.asarray(p["betas"])
        return np.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    if target.name == "gaussian":
        return np.asarray(p["sd"])
    raise ConfigError(f"no closed-form prior sd for family {target.name!r}; give proposal_sd explicitly")


# ---------------------------------------------------------------------------
# generators: (n, seed path) -> points


Generator = Callable[[int, tuple], np.ndarray]


def build_generator(spec: dict, target: dist.ScoredTarget, seed: int) -> Generator:
    kind = spec.get("kind", "exact")
    if kind == "exact":
        return lambda n, key: target.sample(n, make_rng(seed, *key, 0))
    if kind == "gaussian":
        q = dist.gaussian_iso(spec.get("mean", 0.0), target.dim, spec.get("sd", 1.0))
        return lambda n, key: q.sample(n, make_rng(seed, *key, 0))
    if kind == "parallel_mh":
        prior = build_target(spec["prior"])
        if prior.dim != target.dim:
            raise ConfigError("MH prior and target dimensions differ")
        sd = spec.get("proposal_sd")
        sd = 0.5 * prior_sd(prior) if sd is None else np.asarray(sd, dtype=float)
        iterations = int(spec.get("iterations", 50))

        def generate(n, key):
            chain_seed = int(np.random.SeedSequence(seed, spawn_key=(*key, 0)).generate_state(1, np.uint64)[0])
            cfg = ParallelMhConfig(target, prior.exact_sampler, sd, iterations, n, chain_seed)
            return parallel_mh(cfg)

        return generate
    raise ConfigError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# integrands: (x, rng) -> values before additive noise


def build_integrand(spec: dict) -> Callable[[np.ndarray, np.random.Generator], np.ndarray]:
    name = spec.get("name")
    if name == "sin_mean":
        return lambda x, rng: np.sin(np.pi * x.mean(axis=1))
    if name == "cos_mean":
        return lambda x, rng: np.cos(np.pi * x.mean(axis=1))
    if name == "identity":
        return lambda x, rng: x.mean(axis=1)
    if name == "constant":
        c = float(spec.get("value", 0.0))
        return lambda x, rng: np.full(x.shape[0], c)
    if name == "mm1_wait":
        cfg = sim.Mm1Config(
            arrival_rate=spec.get("arrival_rate", 1.0),
            n_customers=spec.get("n_customers", 10),
            replications=spec.get("replications", 100),
        )
        return lambda x, rng: np.array([sim.mm1_mean_wait(r, cfg, rng) for r in x[:, 0]])
    if name == "network_delay":
        cfg = sim.NetworkConfig(n_messages=spec.get("n_messages", 30), replications=spec.get("replications", 100))
        return lambda x, rng: np.array([sim.network_mean_delay(r, cfg, rng) for r in x])
    raise ConfigError(f"unknown integrand {name!r}")


def build_noise(spec: Optional[dict]) -> dist.NoiseModel:
    spec = spec or {"kind": "none"}
    coef = spec.get("coef", ())
    coef = tuple(np.atleast_1d(np.asarray(coef, dtype=float)).tolist())
    return dist.NoiseModel(spec.get("kind", "none"), float(spec.get("sigma", 0.0)), coef)


# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    name: str
    target: dict
    generator: dict
    integrand: dict
    n_grid: list
    noise: dict = field(default_factory=lambda: {"kind": "none"})
    repetitions: int = 50
    methods: list = field(default_factory=lambda: list(METHODS))
    hyper: dict = field(default_factory=dict)
    ground_truth: dict = field(default_factory=lambda: {"method": "mc", "N": 1_000_000})
    seed: int = 0
    description: str = ""

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be nonempty and strictly ascending")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        extra = set(self.hyper) - set(DEFAULT_HYPER)
        if extra:
            raise ConfigError(f"unknown hyperparameters {sorted(extra)}")
        self.hyper = {**DEFAULT_HYPER, **self.hyper}
        if int(self.seed) < 0:
            raise ConfigError("seed must be nonnegative")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**copy.deepcopy(d))

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    @property
    def dim(self) -> int:
        return self.build_target().dim

    def build_target(self) -> dist.ScoredTarget:
        return build_target(self.target)

    def hyperparameters(self) -> Hyperparameters:
        h = self.hyper
        return Hyperparameters(
            alpha=float(h["alpha"]),
            lambda_rule=LambdaRule(float(h["lambda_multiplier"]), float(h["lambda_exponent"])),
            B0=float(h["B0"]),
            qp=QpSettings(float(h["qp_tol"]), int(h["qp_max_iter"]), h["qp_gap_rtol"]),
        )


def builtin_presets() -> dict:
    text = resources.files("drsk").joinpath("presets.json").read_text()
    return json.loads(text)["presets"]


def load_config(path=None, preset: Optional[str] = None) -> ExperimentConfig:
    """Read an experiment from a file, a named preset in a file, or a built-in preset."""
    if path is None:
        if preset is None:
            raise ConfigError("give a config file, a preset name, or both")
        presets = builtin_presets()
    else:
        raw = json.loads(Path(path).read_text())
        if "presets" not in raw:
            if preset is not None and raw.get("name") != preset:
                raise ConfigError(f"{path} holds a single experiment, not preset {preset!r}")
            return ExperimentConfig.from_dict(raw)
        presets = raw["presets"]
        if preset is None:
            if len(presets) != 1:
                raise ConfigError(f"{path} holds several presets; pick one with --preset")
            preset = next(iter(presets))
    if preset not in presets:
        raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(sorted(presets))}")
    return ExperimentConfig.from_dict({"name": preset, **presets[preset]})
