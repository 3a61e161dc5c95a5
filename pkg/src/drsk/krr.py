"""Kernel ridge regression in the Stein-augmented RKHS (kernel k+ = 1 + k0).

The fitted surrogate ``s(x) = beta . k+(X, x)`` has a known target mean,
``sum(beta)``, because every k0 section integrates to zero under the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve

from .stein import SteinKernel, gram


@dataclass(frozen=True)
class LambdaRule:
    """Ridge parameter ``multiplier * m ** exponent`` for training size ``m``."""

    multiplier: float = 0.01
    exponent: float = -0.5

    def __call__(self, m: int) -> float:
        return float(self.multiplier * float(m) ** self.exponent)


@dataclass(frozen=True)
class KrrModel:
    beta: np.ndarray
    train_x: np.ndarray
    lam: float
    kernel: SteinKernel

    @property
    def m(self) -> int:
        return int(self.beta.size)


def _ridge_system(Kplus: np.ndarray, lam: float) -> np.ndarray:
    m = Kplus.shape[0]
    A = Kplus + lam * m * np.eye(m)
    return 0.5 * (A + A.T)


def fit(train_x, train_z, kernel: SteinKernel, lam: float, Kplus: np.ndarray | None = None) -> KrrModel:
    """Solve ``(K+ + lam m I) beta = z``.

    ``Kplus`` may be supplied when the Gram block is already available.
    """
    if not lam > 0:
        raise ValueError(f"ridge parameter must be positive, got {lam}")
    x = np.atleast_2d(np.asarray(train_x, dtype=float))
    z = np.asarray(train_z, dtype=float).reshape(-1)
    if x.shape[0] != z.size or z.size == 0:
        raise ValueError("train_x and train_z must be nonempty with matching lengths")
    if not np.all(np.isfinite(z)):
        raise ValueError("training targets must be finite")
    if Kplus is None:
        Kplus = gram(kernel, x).Kplus
    A = _ridge_system(Kplus, lam)
    try:
        factor = cho_factor(A, lower=True, check_finite=False)
        solve_a = lambda rhs: cho_solve(factor, rhs, check_finite=False)  # noqa: E731
    except LinAlgError:
        # rounding can leave a numerically indefinite matrix when lam*m is tiny
        lu = lu_factor(A, check_finite=False)
        solve_a = lambda rhs: lu_solve(lu, rhs, check_finite=False)  # noqa: E731
    beta = solve_a(z)
    # one step of iterative refinement keeps the residual at working precision
    beta = beta + solve_a(z - A @ beta)
    return KrrModel(beta=beta, train_x=x, lam=float(lam), kernel=kernel)


def residual(model: KrrModel, train_z, Kplus: np.ndarray | None = None) -> float:
    """``||(K+ + lam m I) beta - z||`` for the defining linear system."""
    if Kplus is None:
        Kplus = gram(model.kernel, model.train_x).Kplus
    A = _ridge_system(Kplus, model.lam)
    return float(np.linalg.norm(A @ model.beta - np.asarray(train_z, dtype=float)))


def predict(model: KrrModel, x, cross_k0: np.ndarray | None = None) -> np.ndarray:
    """Surrogate values at the rows of ``x``.

    ``cross_k0`` is the optional precomputed ``[k0(x_j, train_i)]`` block.
    """
    if cross_k0 is None:
        cross_k0 = model.kernel.k0_matrix(x, model.train_x)
    return (cross_k0 + 1.0) @ model.beta


def target_mean(model: KrrModel) -> float:
    return float(np.sum(model.beta))


def cf_adjust(model: KrrModel, eval_x, eval_z, cross_k0: np.ndarray | None = None) -> np.ndarray:
    """Control-functional adjusted samples ``z - s(x) + mean(s)``."""
    z = np.asarray(eval_z, dtype=float).reshape(-1)
    s = predict(model, eval_x, cross_k0)
    if s.size != z.size:
        raise ValueError("eval_x and eval_z must have matching lengths")
    return z - s + target_mean(model)


def objective(model: KrrModel, train_z, beta=None, Kplus: np.ndarray | None = None) -> float:
    """Ridge objective ``mean((z - K+ b)^2) + lam b' K+ b`` for coefficients ``b``."""
    b = model.beta if beta is None else np.asarray(beta, dtype=float)
    if Kplus is None:
        Kplus = gram(model.kernel, model.train_x).Kplus
    fitted = Kplus @ b
    z = np.asarray(train_z, dtype=float)
    return float(np.mean((z - fitted) ** 2) + model.lam * b @ Kplus @ b)
