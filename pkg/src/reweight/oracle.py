"""Independent brute-force verifiers.

The capped-weights oracle minimizes the entropy-regularized linear
objective directly by projected gradient descent over the capped simplex,
deliberately avoiding the water-filling code path so that agreement between
the two is evidence rather than tautology. Also provides central-difference
gradients for checking analytic gradient code.
"""

from __future__ import annotations

import numpy as np

from .core import ConfigError

__all__ = [
    "project_capped_simplex",
    "brute_force_optimal_weights",
    "kkt_residual",
    "finite_diff_grad",
]

_W_FLOOR = 1e-10  # lower box bound; avoids log(0) and unbounded gradients


def project_capped_simplex(v, cap: float, floor: float = 0.0) -> np.ndarray:
    """Euclidean projection onto {w : floor <= w_i <= cap, sum w = 1}.

    The projection is clip(v - lam, floor, cap) for the shift lam that makes
    the coordinates sum to one; the sum is nonincreasing in lam, so
    bisection finds it.
    """
    v = np.asarray(v, dtype=float)
    b = v.size
    if cap * b < 1.0 - 1e-12:
        raise ConfigError(f"infeasible cap: cap*b = {cap * b:.6g} < 1")
    lo = v.min() - max(1.0, cap)  # every coordinate clips to cap: sum >= 1
    hi = v.max()  # every coordinate clips to (near) floor: sum <= 1
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, floor, cap).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), floor, cap)


def _objective(w, gaps, r):
    wl = np.where(w > 0, w * np.log(np.maximum(w, 1e-300)), 0.0)
    return float(-(w @ gaps) + r * wl.sum())


def _project_scaled(v, scale, cap: float, floor: float) -> np.ndarray:
    """Projection onto {floor <= w <= cap, sum w = 1} in the diagonal metric
    diag(1/scale): clip(v - lam * scale, floor, cap) with lam found by
    bisection (the sum is nonincreasing in lam)."""
    lo, hi = -1.0, 1.0
    while np.clip(v - lo * scale, floor, cap).sum() < 1.0:
        lo *= 2.0
        if lo < -1e18:
            break
    while np.clip(v - hi * scale, floor, cap).sum() > 1.0:
        hi *= 2.0
        if hi > 1e18:
            break
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid * scale, floor, cap).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * scale, floor, cap)


def brute_force_optimal_weights(gaps, r: float, cap: float, tol: float = 1e-9) -> np.ndarray:
    """Minimize -sum w_i gap_i + r sum w_i log w_i over the capped simplex.

    Projected descent from the uniform point with a backtracking line
    search. The feasible set is floored at 1e-10 per coordinate, which is
    within every tolerance of interest and keeps log(w) bounded. Each step
    scales the gradient by the inverse diagonal Hessian w/r and projects in
    that same metric (projected Newton), falling back to a plain Euclidean
    gradient step when the Newton step fails to improve. Stops when the
    projected-gradient residual is below `tol` or no improving step exists.
    """
    gaps = np.asarray(gaps, dtype=float)
    b = gaps.size
    if r <= 0:
        raise ConfigError("temperature r must be positive")
    if cap * b < 1.0 - 1e-12:
        raise ConfigError(f"infeasible cap: cap*b = {cap * b:.6g} < 1")

    w = np.full(b, 1.0 / b)
    obj = _objective(w, gaps, r)
    probe = 1e-4
    for _ in range(200):
        grad = -gaps + r * (1.0 + np.log(w))
        moved = np.abs(project_capped_simplex(w - probe * grad, cap, _W_FLOOR) - w).max()
        if moved / probe < tol:
            break
        improved = False
        # Newton step in the scaled metric, then Euclidean fallback.
        scale = w / r
        step = 1.0
        while step > 1e-16:
            cand = _project_scaled(w - step * scale * grad, step * scale, cap, _W_FLOOR)
            cand_obj = _objective(cand, gaps, r)
            if cand_obj < obj - 1e-18:
                improved = True
                break
            step *= 0.5
        if not improved:
            norm = np.abs(grad).max()
            step = 1.0 / norm if norm > 0 else 0.0
            while step * norm > 1e-16:
                cand = project_capped_simplex(w - step * grad, cap, _W_FLOOR)
                cand_obj = _objective(cand, gaps, r)
                if cand_obj < obj - 1e-18:
                    improved = True
                    break
                step *= 0.5
        if not improved:
            break
        w, obj = cand, cand_obj
    return w


def kkt_residual(w, gaps, r: float, cap: float) -> float:
    """Stationarity check for the capped-weights problem.

    On the interior (non-binding) coordinates, -gap_i + r (1 + log w_i) must
    be a common constant; returns the max deviation from its mean.
    """
    w = np.asarray(w, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    interior = (w > 1e-12) & (w < cap - 1e-12)
    if interior.sum() < 2:
        return 0.0
    station = -gaps[interior] + r * (1.0 + np.log(w[interior]))
    return float(np.abs(station - station.mean()).max())


def finite_diff_grad(loss_fn, theta, epsilon: float = 1e-6) -> np.ndarray:
    """Central finite differences: (f(x + e) - f(x - e)) / (2 eps) per coordinate."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += epsilon
        tm[j] -= epsilon
        grad[j] = (loss_fn(tp) - loss_fn(tm)) / (2.0 * epsilon)
    return grad
