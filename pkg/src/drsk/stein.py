"""Stein-kernelized RBF kernels and their Gram matrices.

The base kernel is ``k(x, x') = exp(-||x - x'||^2 / h2)`` where ``h2`` is the
squared length scale (what the median heuristic returns).  Applying the Stein
operator of the target to both arguments gives

    k0(x, x') = k * [2d/h2 - 4 r2/h2^2 + (2/h2) (u(x) - u(x')).(x - x') + u(x).u(x')]

with ``r2 = ||x - x'||^2`` and ``u`` the score, and ``k+ = 1 + k0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist, pdist


def rbf(x, x_prime, h2: float) -> float:
    """Base RBF kernel value for a single pair."""
    if h2 <= 0:
        raise ValueError("bandwidth must be positive")
    diff = np.asarray(x, dtype=float) - np.asarray(x_prime, dtype=float)
    return float(np.exp(-np.dot(diff, diff) / h2))


@dataclass(frozen=True)
class SteinKernel:
    """RBF base kernel of squared scale ``h2`` composed with a score function."""

    h2: float
    score: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __post_init__(self):
        if not (self.h2 > 0 and np.isfinite(self.h2)):
            raise ValueError(f"bandwidth h2 must be positive and finite, got {self.h2}")

    @classmethod
    def for_target(cls, target, h2: float) -> "SteinKernel":
        return cls(float(h2), target.score, target.dim)

    def _points(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {x.shape[1]}")
        return x

    def k0(self, x, x_prime) -> float:
        """Single-pair evaluation of k0."""
        x = np.asarray(x, dtype=float).reshape(-1)
        y = np.asarray(x_prime, dtype=float).reshape(-1)
        ux = np.asarray(self.score(x), dtype=float).reshape(-1)
        uy = np.asarray(self.score(y), dtype=float).reshape(-1)
        diff = x - y
        r2 = float(np.dot(diff, diff))
        k = np.exp(-r2 / self.h2)
        inner = (
            2.0 * self.dim / self.h2
            - 4.0 * r2 / self.h2**2
            + (2.0 / self.h2) * float(np.dot(ux - uy, diff))
            + float(np.dot(ux, uy))
        )
        return float(k * inner)

    def kplus(self, x, x_prime) -> float:
        return 1.0 + self.k0(x, x_prime)

    def k0_matrix(self, xa, xb=None, ua=None, ub=None) -> np.ndarray:
        """Cross matrix ``[k0(xa_i, xb_j)]``; scores may be passed precomputed."""
        xa = self._points(xa)
        ua = np.atleast_2d(self.score(xa)) if ua is None else np.atleast_2d(ua)
        if xb is None:
            xb, ub = xa, ua
        else:
            xb = self._points(xb)
            ub = np.atleast_2d(self.score(xb)) if ub is None else np.atleast_2d(ub)
        r2 = cdist(xa, xb, "sqeuclidean")
        # (u_i - u_j).(x_i - x_j) expanded into four inner-product terms
        cross = (
            np.sum(ua * xa, axis=1)[:, None]
            + np.sum(ub * xb, axis=1)[None, :]
            - ua @ xb.T
            - xa @ ub.T
        )
        inner = 2.0 * self.dim / self.h2 - 4.0 * r2 / self.h2**2 + (2.0 / self.h2) * cross + ua @ ub.T
        return np.exp(-r2 / self.h2) * inner

    def diag(self, x) -> np.ndarray:
        """``k0(x_i, x_i) = 2d/h2 + ||u(x_i)||^2``."""
        x = self._points(x)
        u = np.atleast_2d(self.score(x))
        return 2.0 * self.dim / self.h2 + np.sum(u * u, axis=1)

    def kappa(self, x) -> float:
        """``max_i sqrt(k+(x_i, x_i))`` over an evaluation set."""
        return float(np.sqrt(1.0 + self.diag(x).max()))


@dataclass(frozen=True)
class GramPair:
    K0: np.ndarray
    Kplus: np.ndarray
    points: np.ndarray


def gram(kernel: SteinKernel, points) -> GramPair:
    """Symmetrized Gram matrices of k0 and k+ on ``points``."""
    pts = kernel._points(points)
    K0 = kernel.k0_matrix(pts)
    K0 = 0.5 * (K0 + K0.T)
    return GramPair(K0=K0, Kplus=K0 + 1.0, points=pts)


def median_bandwidth(points) -> float:
    """Median of pairwise squared distances (mid-pair average for even counts)."""
    pts = np.asarray(points, dtype=float)
    pts = pts.reshape(-1, 1) if pts.ndim == 1 else pts
    if pts.shape[0] < 2:
        raise ValueError("median bandwidth needs at least two points")
    h2 = float(np.median(pdist(pts, "sqeuclidean")))
    if not h2 > 0:
        raise ValueError("median pairwise squared distance is zero")
    return h2
