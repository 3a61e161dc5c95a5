"""Regenerate src/drsk/presets.json (run from the repository root)."""

import json
import math
from pathlib import Path

GRID = [32, 64, 128, 256, 512]
SMALL_NOISE = {"kind": "gaussian", "sigma": math.sqrt(0.001**3)}
QP = {"qp_max_iter": 2000, "qp_gap_rtol": 1e-3}
SEED = 20240613


def experiment(description, target, generator, integrand, **kw):
    out = {
        "description": description,
        "target": target,
        "generator": generator,
        "integrand": integrand,
        "n_grid": GRID,
        "repetitions": 50,
        "methods": ["naive", "cf", "simcf", "bbis", "drsk", "drsk_r"],
        "hyper": dict(QP),
        "ground_truth": {"method": "quadrature"},
        "seed": SEED,
    }
    out.update(kw)
    return out


presets = {}

noises = {
    "1": {"kind": "none"},
    "2": {"kind": "gaussian_linear", "sigma": 0.1, "coef": 1.0},
    "3": {"kind": "gaussian", "sigma": 0.1},
}
shifts = {"A": None, "B": 0.5, "C": 1.0}
for s, mean in shifts.items():
    for k, noise in noises.items():
        gen = {"kind": "exact"} if mean is None else {"kind": "gaussian", "mean": mean, "sd": 1.0}
        presets[f"illustration_{s}{k}"] = experiment(
            f"d=4 standard Gaussian target, sin of the coordinate mean; bias setting {s}, noise setting {k}",
            {"family": "gaussian", "mean": 0.0, "sd": 1.0, "dim": 4},
            gen,
            {"name": "sin_mean"},
            noise=noise,
            ground_truth={"value": 0.0},
        )

presets["standard_d1"] = experiment(
    "d=1 standard Gaussian, exact sampling, sin(pi x), no noise",
    {"family": "gaussian", "mean": 0.0, "sd": 1.0, "dim": 1},
    {"kind": "exact"},
    {"name": "sin_mean"},
    n_grid=[64, 128, 256, 512, 1024],
    ground_truth={"value": 0.0},
)

for d in (1, 2, 4):
    presets[f"mixture_d{d}"] = experiment(
        f"product of 0.7 N(2,1) + 0.3 N(1,1), d={d}, sampled from N(1,1)^d",
        {"family": "gaussian_mixture", "weights": [0.7, 0.3], "means": [2.0, 1.0], "variances": [1.0, 1.0], "dim": d},
        {"kind": "gaussian", "mean": 1.0, "sd": 1.0},
        {"name": "sin_mean"},
        noise=SMALL_NOISE,
    )
    presets[f"student_t_d{d}"] = experiment(
        f"product of 1 + t_3, d={d}, sampled from N(1, I)",
        {"family": "student_t", "dof": 3.0, "loc": 1.0, "scale": 1.0, "dim": d},
        {"kind": "gaussian", "mean": 1.0, "sd": 1.0},
        {"name": "cos_mean"},
        noise=SMALL_NOISE,
    )
    presets[f"gamma_conjugate_d{d}"] = experiment(
        f"Gamma posterior, L=12, sums 3+5i, prior Gamma(2,2), d={d}, 50-step parallel MH",
        {"family": "gamma_conjugate", "L": 12, "sums": [3.0 + 5 * i for i in range(1, d + 1)]},
        {"kind": "parallel_mh", "prior": {"family": "gamma", "shapes": [2.0] * d, "rates": [2.0] * d}, "iterations": 50},
        {"name": "sin_mean"},
        noise=SMALL_NOISE,
    )
    presets[f"beta_conjugate_d{d}"] = experiment(
        f"Beta posterior, L=11, successes 1+i, prior Beta(1,1), d={d}, 50-step parallel MH",
        {"family": "beta_conjugate", "L": 11, "successes": [1.0 + i for i in range(1, d + 1)]},
        {"kind": "parallel_mh", "prior": {"family": "beta", "alphas": [1.0] * d, "betas": [1.0] * d}, "iterations": 50},
        {"name": "cos_mean"},
        noise=SMALL_NOISE,
    )

for setting in "ABC":
    presets[f"network_{setting}"] = experiment(
        f"12-rate communication network, posterior from setting {setting}, 50-step parallel MH (desk scale)",
        {"family": "network_posterior", "setting": setting},
        {"kind": "parallel_mh", "prior": {"family": "gamma", "shapes": [10.0] * 12, "rates": [0.1] * 12}, "iterations": 50},
        {"name": "network_delay", "n_messages": 30, "replications": 100},
        n_grid=[16, 32, 64],
        repetitions=10,
        ground_truth={"method": "mc", "N": 2000},
    )

presets["mm1"] = experiment(
    "M/M/1 mean wait of the first 10 customers; Gamma posterior of the service rate (desk scale)",
    {"family": "mm1_posterior", "L": 20, "total_service_time": 10.0, "prior_shape": 2.0, "prior_rate": 1.0},
    {"kind": "parallel_mh", "prior": {"family": "gamma", "shapes": [2.0], "rates": [1.0]}, "iterations": 50},
    {"name": "mm1_wait", "n_customers": 10, "replications": 100},
    n_grid=[32, 64, 128],
    repetitions=20,
    ground_truth={"method": "mc", "N": 100000},
)

path = Path("src/drsk/presets.json")
path.write_text(json.dumps({"presets": presets}, indent=1) + "\n")
print(f"wrote {len(presets)} presets to {path}")
