"""Black-box importance weights: minimize w'K0w over the capped simplex.

Feasible set: ``{w : 0 <= w_j <= cap, sum(w) = 1}`` with ``cap = B0 / n``
(``cap = inf`` recovers the plain simplex).  The solver is accelerated
projected gradient with an exact O(n log n) projection; whenever the current
iterate identifies an active set, the equality-constrained subproblem on the
free coordinates is solved directly and kept if it is feasible and better.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

log = logging.getLogger(__name__)

BOUND_TOL = 1e-12


class InfeasibleCapError(ValueError):
    """``cap * n < 1``: no probability vector respects the cap."""


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray
    cap: float
    ksd: float
    kkt_residual: float
    iterations: int = 0
    converged: bool = True
    gap: float = 0.0

    @property
    def max_weight(self) -> float:
        return float(self.w.max())


def _check_cap(n: int, cap: float) -> None:
    if n < 1:
        raise ValueError("need at least one weight")
    if not cap > 0 or cap * n < 1.0 - 1e-12:
        raise InfeasibleCapError(f"cap {cap} is infeasible for n={n} (need cap*n >= 1)")


def ksd(w, K0) -> float:
    """Kernelized Stein discrepancy ``w' K0 w`` of a weighting."""
    w = np.asarray(w, dtype=float).reshape(-1)
    K0 = np.asarray(K0, dtype=float)
    if K0.shape != (w.size, w.size):
        raise ValueError(f"weights of length {w.size} do not match K0 of shape {K0.shape}")
    val = float(w @ K0 @ w)
    if -1e-10 < val < 0:
        val = 0.0
    return val


def _mass(sorted_v: np.ndarray, suffix: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """``sum_j max(v_j - tau, 0)`` for each entry of ``tau``."""
    idx = np.searchsorted(sorted_v, tau, side="right")
    return suffix[idx] - (sorted_v.size - idx) * tau


def project_capped_simplex(v, cap: float = np.inf) -> np.ndarray:
    """Euclidean projection onto ``{0 <= w <= cap, sum(w) = 1}``.

    The projection is ``clip(v - tau, 0, cap)`` for the unique shift ``tau``
    making the entries sum to one; ``tau`` is located among the sorted
    breakpoints and then solved exactly on its linear segment.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    n = v.size
    _check_cap(n, cap)
    finite_cap = np.isfinite(cap)
    if finite_cap and n * cap <= 1.0 + 1e-12:
        return np.full(n, 1.0 / n)

    vs = np.sort(v)
    suffix = np.concatenate([np.cumsum(vs[::-1])[::-1], [0.0]])
    # unique breakpoints keep every segment of the piecewise-linear mass nondegenerate
    bp = np.unique(np.concatenate([vs, vs - cap]) if finite_cap else vs)
    g = _mass(vs, suffix, bp)
    if finite_cap:
        g = g - _mass(vs, suffix, bp + cap)

    above = np.nonzero(g >= 1.0)[0]
    if above.size == 0:
        # only reachable without a cap: every coordinate is free
        tau = (v.sum() - 1.0) / n
    else:
        k = above[-1]
        if k + 1 < bp.size:
            slope = (g[k] - g[k + 1]) / (bp[k + 1] - bp[k])
            tau = bp[k] + (g[k] - 1.0) / slope if slope > 0 else bp[k]
            tau = min(max(tau, bp[k]), bp[k + 1])
        else:
            tau = bp[k]
    w = np.clip(v - tau, 0.0, cap)
    # absorb the rounding residual in coordinates that have room to move
    r = 1.0 - w.sum()
    if r != 0.0:
        room = (w < cap) if r > 0 else (w > 0)
        inner = room & (w > 0) & (w < cap)
        pick = inner if inner.any() else room
        w[pick] = np.clip(w[pick] + r / pick.sum(), 0.0, cap)
    return w


def _active_sets(w: np.ndarray, cap: float):
    lower = w <= BOUND_TOL
    upper = (w >= cap - BOUND_TOL) if np.isfinite(cap) else np.zeros_like(lower)
    upper &= ~lower
    return lower, upper, ~(lower | upper)


def _stationarity(g: np.ndarray, lower, upper, free) -> float:
    """Smallest violation of the KKT sign conditions over the multiplier.

    For a multiplier ``nu``: free gradients must equal ``nu``, lower-active
    ones must be ``>= nu`` and upper-active ones ``<= nu``.  The squared
    violation is convex piecewise quadratic in ``nu``; its minimizer is found
    segment by segment.
    """
    gf, gl, gu = g[free], np.sort(g[lower]), np.sort(g[upper])

    def phi(nu):
        return (
            np.sum((gf - nu) ** 2)
            + np.sum(np.maximum(nu - gl, 0.0) ** 2)
            + np.sum(np.maximum(gu - nu, 0.0) ** 2)
        )

    bps = np.unique(np.concatenate([gl, gu]))
    if bps.size == 0:
        return float(np.sqrt(phi(gf.mean()))) if gf.size else 0.0
    edges = np.concatenate([[-np.inf], bps, [np.inf]])
    # segment s is (edges[s], edges[s+1]); active lower entries have g <= edges[s],
    # active upper entries have g >= edges[s+1]
    cl = np.searchsorted(gl, edges[:-1], side="right")
    sl = np.concatenate([[0.0], np.cumsum(gl)])[cl]
    cu = gu.size - np.searchsorted(gu, edges[1:], side="left")
    su = np.concatenate([np.cumsum(gu[::-1])[::-1], [0.0]])[gu.size - cu]
    count = gf.size + cl + cu
    total = gf.sum() + sl + su
    lo, hi = edges[:-1], edges[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        nu = total / count
    slack_lo = 1e-12 * (1.0 + np.abs(np.where(np.isfinite(lo), lo, 0.0)))
    slack_hi = 1e-12 * (1.0 + np.abs(np.where(np.isfinite(hi), hi, 0.0)))
    valid = (count > 0) & (nu >= lo - slack_lo) & (nu <= hi + slack_hi)
    cands = list(np.clip(nu[valid], lo[valid], hi[valid]))
    # a segment with nothing active has zero violation anywhere inside it
    flat = np.nonzero(count == 0)[0]
    cands += [hi[s] if np.isfinite(hi[s]) else lo[s] for s in flat]
    if not cands:
        cands = list(bps)
    best = min(phi(c) for c in cands)
    return float(np.sqrt(max(best, 0.0)))


def kkt_residual(w, K0, cap: float = np.inf) -> float:
    """Norm of the violated stationarity conditions at a feasible ``w``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    K0 = np.asarray(K0, dtype=float)
    n = w.size
    _check_cap(n, cap)
    if np.any(w < -1e-10) or np.any(w > cap + 1e-10) or abs(w.sum() - 1.0) > 1e-8:
        raise ValueError("kkt_residual requires a feasible weight vector")
    lower, upper, free = _active_sets(w, cap)
    return _stationarity(2.0 * K0 @ w, lower, upper, free)


def _vertex(g: np.ndarray, cap: float) -> np.ndarray:
    """Minimizer of the linear function ``g . s`` over the capped simplex."""
    n = g.size
    s = np.zeros(n)
    if not np.isfinite(cap):
        s[np.argmin(g)] = 1.0
        return s
    order = np.argsort(g, kind="stable")
    full = min(int(np.floor(1.0 / cap + 1e-12)), n)
    s[order[:full]] = cap
    rest = 1.0 - cap * full
    if full < n and rest > 0:
        s[order[full]] = rest
    return s


def duality_gap(w, K0, cap: float = np.inf) -> float:
    """Frank-Wolfe gap; an upper bound on ``w'K0w - min``."""
    g = 2.0 * (np.asarray(K0) @ w)
    return max(float(g @ (w - _vertex(g, cap))), 0.0)


def _polish(w: np.ndarray, K0: np.ndarray, cap: float, rho: float, max_rounds: int = 20, prox_steps: int = 4):
    """Feasible point on the face suggested by the active sets of ``w``.

    On a face (free set F, upper-active coordinates fixed at the cap) the
    steps minimize ``w'K0w + rho |w - anchor|^2`` with the anchor moved to
    each new solution.  Gram matrices of smooth kernels are numerically
    singular, so the face problem alone has a whole affine set of minimizers;
    the proximal term selects the one nearest the current iterate.
    Coordinates that leave the box are moved onto the violated bound and the
    reduced face is solved again.  Returns ``None`` when no feasible face
    point is reached.
    """
    lower, upper, free = _active_sets(w, cap)
    for _ in range(max_rounds):
        if not free.any():
            return None
        F = np.nonzero(free)[0]
        fixed = np.where(upper, cap, 0.0)
        mass = 1.0 - fixed.sum()
        try:
            factor = cho_factor(K0[np.ix_(F, F)] + rho * np.eye(F.size), lower=True, check_finite=False)
        except LinAlgError:
            return None
        m_ones = cho_solve(factor, np.ones(F.size), check_finite=False)
        pull = K0[F] @ fixed
        cand = w.copy()
        for _ in range(prox_steps):
            # stationarity: (K_FF + rho I) w_F = rho anchor_F - K_F. fixed + (nu / 2) 1
            m_b = cho_solve(factor, rho * cand[F] - pull, check_finite=False)
            half_nu = (mass - m_b.sum()) / m_ones.sum()
            cand = fixed.copy()
            cand[F] = m_b + half_nu * m_ones
        below = free & (cand < -BOUND_TOL)
        above = free & (cand > cap + BOUND_TOL)
        if not (below.any() or above.any()):
            cand = np.clip(cand, 0.0, cap)
            cand /= cand.sum()
            return None if np.any(cand > cap) else cand
        free = free & ~below & ~above
        lower |= below
        upper |= above
    return None


def solve(
    K0,
    cap: float = np.inf,
    tol: float = 1e-8,
    max_iter: int = 50_000,
    gap_rtol: float | None = None,
    check_every: int = 10,
    polish_every: int = 500,
    first_polish: int = 50,
) -> WeightVector:
    """Minimize ``w' K0 w`` subject to ``sum(w) = 1`` and ``0 <= w <= cap``.

    Parameters
    ----------
    K0 : (n, n) symmetric matrix
    cap : per-weight upper bound; ``np.inf`` for no cap
    tol : target KKT residual
    max_iter : iteration budget; on exhaustion the lowest-objective iterate is
        returned with ``converged=False`` rather than raising
    gap_rtol : optional early stop once the Frank-Wolfe gap certifies the
        objective to this relative accuracy
    first_polish, polish_every : an exact solve on the current active face is
        attempted after ``first_polish`` iterations, then at intervals that
        double up to ``polish_every``

    Returns
    -------
    WeightVector
    """
    K0 = np.asarray(K0, dtype=float)
    n = K0.shape[0]
    if K0.shape != (n, n):
        raise ValueError("K0 must be square")
    _check_cap(n, cap)
    K0 = 0.5 * (K0 + K0.T)
    uniform = np.full(n, 1.0 / n)

    def result(w, it, converged):
        return WeightVector(
            w=w,
            cap=cap,
            ksd=ksd(w, K0),
            kkt_residual=kkt_residual(w, K0, cap),
            iterations=it,
            converged=converged,
            gap=duality_gap(w, K0, cap),
        )

    if n == 1 or not np.any(K0):
        return result(uniform, 0, True)

    lam_max = float(eigvalsh(K0, subset_by_index=[n - 1, n - 1], check_finite=False)[0])
    if lam_max <= 0:
        return result(uniform, 0, True)
    step = 1.0 / (2.0 * lam_max)

    def gap_ok(w, obj):
        return gap_rtol is not None and duality_gap(w, K0, cap) <= gap_rtol * max(obj, 1e-300)

    w = project_capped_simplex(uniform, cap)
    y, t = w.copy(), 1.0
    best_w, best_obj = w, ksd(w, K0)
    done = kkt_residual(w, K0, cap) <= tol
    it = 0
    interval = max(check_every, min(first_polish, polish_every))
    next_polish = interval
    while not done and it < max_iter:
        it += 1
        w_new = project_capped_simplex(y - step * 2.0 * (K0 @ y), cap)
        if np.dot(y - w_new, w_new - w) > 0:
            # gradient-based restart of the momentum sequence
            t, y = 1.0, w_new
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = w_new + ((t - 1.0) / t_new) * (w_new - w)
            t = t_new
        w = w_new
        if it % check_every and it != max_iter:
            continue
        obj = ksd(w, K0)
        if obj <= best_obj:
            best_w, best_obj = w, obj
        if kkt_residual(w, K0, cap) <= tol or gap_ok(w, obj):
            best_w, done = w, True
            break
        if it >= next_polish:
            interval = min(2 * interval, polish_every)
            next_polish = it + interval
            cand = _polish(w, K0, cap, rho=1e-6 * lam_max)
            if cand is not None and ksd(cand, K0) <= obj + 1e-15:
                w, y, t = cand, cand.copy(), 1.0
                best_w, best_obj = cand, ksd(cand, K0)
                if kkt_residual(cand, K0, cap) <= tol:
                    done = True
    if not done:
        log.debug("capped-simplex QP hit the iteration budget (%d) without converging", it)
    return result(best_w, it, done)
