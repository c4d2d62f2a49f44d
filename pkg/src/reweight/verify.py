"""Self-contained verification suite behind the `verify` CLI subcommand.

Each check pits a production code path against an independent brute-force
oracle and reports the tolerance it used. Gradient functions are injectable
so a deliberately broken gradient can be used as a negative control.
"""

from __future__ import annotations

import numpy as np

from .core import capped_optimal_weights, normalize_losses
from .diagnostics import delta_t
from .oracle import brute_force_optimal_weights, finite_diff_grad, kkt_residual
from .problems import nonconvex_loss_grad, regression_loss_grad

__all__ = ["run_all", "check_prop1_agreement", "check_gradients",
           "check_delta_sign", "check_cap_enforcement", "check_degenerate_limit"]


def check_prop1_agreement(n_instances: int = 200, seed: int = 0, tol: float = 1e-6):
    """Water-filling weights vs projected-descent oracle, max-norm."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        b = int(rng.integers(2, 9))
        r = float(10.0 ** rng.uniform(-1, 1))
        cap = 2.0 / b
        h = rng.uniform(-1.0, 1.0, size=b)
        w_fast = capped_optimal_weights(h, r, cap)
        w_oracle = brute_force_optimal_weights(h, r, cap)
        worst = max(worst, float(np.abs(w_fast - w_oracle).max()))
    return worst <= tol, f"prop1 agreement: max |diff| = {worst:.2e} (tol {tol:.0e})"


def check_kkt(n_instances: int = 50, seed: int = 1, tol: float = 1e-6):
    """Oracle stationarity: interior coordinates share a common multiplier."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        b = int(rng.integers(3, 9))
        r = float(10.0 ** rng.uniform(-1, 1))
        cap = 2.0 / b
        h = rng.uniform(-1.0, 1.0, size=b)
        w = brute_force_optimal_weights(h, r, cap)
        worst = max(worst, kkt_residual(w, h, r, cap))
    return worst <= tol, f"oracle KKT residual: max = {worst:.2e} (tol {tol:.0e})"


def check_gradients(n_points: int = 100, seed: int = 2, rel_tol: float = 1e-5,
                    regression_grad=None, nonconvex_grad=None):
    """Analytic gradients vs central finite differences, relative error."""
    regression_grad = regression_grad or regression_loss_grad
    nonconvex_grad = nonconvex_grad or nonconvex_loss_grad
    rng = np.random.default_rng(seed)
    worst = 0.0
    p = 6
    # Below this gradient magnitude the comparison is effectively absolute:
    # central differences on near-flat regions (e.g. the saturated tails of
    # the non-convex loss) are dominated by cancellation noise ~1e-10.
    grad_floor = 1e-3
    for _ in range(n_points):
        x = rng.standard_normal(p)
        y = float(rng.standard_normal())
        W = rng.standard_normal(p)
        b = float(rng.standard_normal())
        _, g = regression_grad(W, b, x, y)
        fd = finite_diff_grad(
            lambda th: regression_loss_grad(th[:p], th[p], x, y)[0],
            np.concatenate([W, [b]]),
        )
        rel = np.abs(g - fd).max() / max(np.abs(fd).max(), grad_floor)
        worst = max(worst, float(rel))

        theta = rng.standard_normal(p)
        _, g2 = nonconvex_grad(theta, x, y)
        fd2 = finite_diff_grad(lambda th: nonconvex_loss_grad(th, x, y)[0], theta)
        rel2 = np.abs(g2 - fd2).max() / max(np.abs(fd2).max(), grad_floor)
        worst = max(worst, float(rel2))
    return worst <= rel_tol, f"gradient check: max rel err = {worst:.2e} (tol {rel_tol:.0e})"


def check_delta_sign(n_batches: int = 500, seed: int = 3, tol: float = 1e-12):
    """delta_t <= 0 whenever weights are monotone nondecreasing in the gap."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_batches):
        b = int(rng.integers(2, 33))
        gaps = np.sort(rng.uniform(0.0, 5.0, size=b))
        w = np.sort(rng.uniform(0.0, 1.0, size=b))
        w /= w.sum()
        worst = max(worst, delta_t(gaps, np.zeros(b), w))
    return worst <= tol, f"delta sign (comonotone): max delta = {worst:.2e} (tol {tol:.0e})"


def check_cap_enforcement(n_batches: int = 500, seed: int = 4, tol: float = 1e-12):
    """Capped-optimal weights never exceed the cap."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_batches):
        b = int(rng.integers(2, 33))
        cap = 2.0 / b
        r = float(10.0 ** rng.uniform(-2, 2))
        losses = rng.exponential(1.0, size=b)
        w = capped_optimal_weights(normalize_losses(losses), r, cap)
        worst = max(worst, float(w.max() - cap))
    return worst <= tol, f"cap enforcement: max excess = {worst:.2e} (tol {tol:.0e})"


def check_degenerate_limit(n_batches: int = 50, seed: int = 5, tol: float = 1e-3):
    """r -> 0 with cap = 2/b puts weight 2/b on the top half of the batch."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_batches):
        b = int(rng.integers(2, 17)) * 2  # even batch: exact top-half solution
        cap = 2.0 / b
        h = rng.permutation(np.linspace(-1, 1, b))
        w = capped_optimal_weights(h, 1e-6, cap)
        expect = np.where(h >= np.median(h), cap, 0.0)
        worst = max(worst, float(np.abs(w - expect).max()))
    return worst <= tol, f"degenerate limit: max |diff| = {worst:.2e} (tol {tol:.0e})"


CHECKS = [
    check_prop1_agreement,
    check_kkt,
    check_gradients,
    check_delta_sign,
    check_cap_enforcement,
    check_degenerate_limit,
]


def run_all(verbose: bool = False, **overrides) -> bool:
    """Run every check; returns True only if all pass.

    Keyword overrides (e.g. regression_grad=...) are forwarded to the checks
    that accept them, which lets tests inject broken implementations.
    """
    all_ok = True
    for check in CHECKS:
        kwargs = {k: v for k, v in overrides.items()
                  if k in check.__code__.co_varnames}
        ok, msg = check(**kwargs)
        all_ok &= ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {msg}")
    return all_ok
