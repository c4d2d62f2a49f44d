"""Synthetic problem suites with per-sample losses and gradients.

Three families:
  * an outlier-contaminated linear regression (clean gaussian features plus
    a block of near-constant outlier inputs with random targets),
  * a convex quadratic suite sharing a common minimizer with zero optimal
    loss, used to make the convergence-theory quantities exactly computable,
  * a bounded non-convex per-sample loss 1 - exp(-residual^2).

Each problem exposes vectorized `losses(theta, idx)` and `grads(theta, idx)`
plus the exact smoothness constant L.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegressionDataset",
    "QuadraticSuite",
    "gen_regression",
    "regression_loss_grad",
    "gen_quadratic_suite",
    "nonconvex_loss_grad",
    "RegressionProblem",
    "QuadraticProblem",
    "NonconvexProblem",
]


@dataclass
class RegressionDataset:
    """Training matrix with clean rows first, then outliers, plus a clean
    hold-out test split and the generating parameters."""

    X: np.ndarray
    y: np.ndarray
    n_clean: int
    m_outlier: int
    W_star: np.ndarray
    b_star: float
    X_test: np.ndarray
    y_test: np.ndarray

    @property
    def is_outlier(self) -> np.ndarray:
        flags = np.zeros(self.X.shape[0], dtype=int)
        flags[self.n_clean :] = 1
        return flags

    def to_csv(self) -> str:
        p = self.X.shape[1]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow([f"x_{j}" for j in range(p)] + ["y", "is_outlier"])
        flags = self.is_outlier
        for i in range(self.X.shape[0]):
            writer.writerow(
                [repr(float(v)) for v in self.X[i]]
                + [repr(float(self.y[i])), flags[i]]
            )
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "RegressionDataset":
        """Rebuild the training block from a CSV export.

        Generator parameters and the test split are not stored in the CSV,
        so they come back empty; the training data round-trips exactly.
        """
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        p = len(header) - 2
        rows = [row for row in reader if row]
        X = np.array([[float(v) for v in row[:p]] for row in rows])
        y = np.array([float(row[p]) for row in rows])
        flags = np.array([int(row[p + 1]) for row in rows])
        n_clean = int((flags == 0).sum())
        return RegressionDataset(
            X=X,
            y=y,
            n_clean=n_clean,
            m_outlier=len(rows) - n_clean,
            W_star=np.empty(0),
            b_star=0.0,
            X_test=np.empty((0, p)),
            y_test=np.empty(0),
        )


def gen_regression(
    p: int = 64,
    n: int = 3200,
    m: int = 800,
    noise_c: float = 0.01,
    seed: int = 0,
    n_test: int = 800,
) -> RegressionDataset:
    """Outlier regression dataset.

    Clean rows: X ~ N(0,1), y = X W* + b* + c * eps. Outlier rows:
    X = 0.1 * N(0,1) + 2.0 with y ~ N(0,1). The test split is drawn from
    the clean process only. Deterministic given the seed.
    """
    if p < 1 or n < 1 or m < 0 or n_test < 0:
        raise ValueError("p, n must be >= 1; m, n_test must be >= 0")
    rng = np.random.default_rng(seed)
    W_star = rng.standard_normal(p)
    b_star = float(rng.standard_normal())

    X_clean = rng.standard_normal((n, p))
    y_clean = X_clean @ W_star + b_star + noise_c * rng.standard_normal(n)
    X_ood = 0.1 * rng.standard_normal((m, p)) + 2.0
    y_ood = rng.standard_normal(m)
    X_test = rng.standard_normal((n_test, p))
    y_test = X_test @ W_star + b_star + noise_c * rng.standard_normal(n_test)

    return RegressionDataset(
        X=np.vstack([X_clean, X_ood]),
        y=np.concatenate([y_clean, y_ood]),
        n_clean=n,
        m_outlier=m,
        W_star=W_star,
        b_star=b_star,
        X_test=X_test,
        y_test=y_test,
    )


def regression_loss_grad(W, b, x_i, y_i):
    """Single-sample squared loss 0.5*(x'W + b - y)^2 and its gradient
    (grad_W, grad_b) stacked as a length-(p+1) vector."""
    W = np.asarray(W, dtype=float)
    x_i = np.asarray(x_i, dtype=float)
    r = float(x_i @ W + b - y_i)
    return 0.5 * r * r, np.concatenate([r * x_i, [r]])


@dataclass
class QuadraticSuite:
    """Per-sample quadratics f_i(theta) = 0.5 (theta - theta*)' A_i (theta - theta*).

    All samples share the minimizer theta_star with optimal value 0, so the
    interpolation condition holds exactly and loss gaps equal raw losses.
    """

    A: np.ndarray  # (M, d, d), each symmetric PSD
    theta_star: np.ndarray
    L_values: np.ndarray  # largest eigenvalue of each A_i

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def L(self) -> float:
        return float(self.L_values.max())


def gen_quadratic_suite(
    M: int, d: int, cond_max: float = 10.0, seed: int = 0
) -> QuadraticSuite:
    """Random PSD quadratics A_i = Q_i D_i Q_i' with orthogonal Q_i and
    eigenvalues log-uniform in [1, cond_max]; shared minimizer ~ N(0, I)."""
    if M < 1 or d < 1 or cond_max < 1:
        raise ValueError("M, d must be >= 1 and cond_max >= 1")
    rng = np.random.default_rng(seed)
    A = np.empty((M, d, d))
    L_values = np.empty(M)
    for i in range(M):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        eigs = np.exp(rng.uniform(0.0, np.log(cond_max), size=d))
        A[i] = (Q * eigs) @ Q.T
        A[i] = 0.5 * (A[i] + A[i].T)  # kill asymmetric roundoff
        L_values[i] = eigs.max()
    theta_star = rng.standard_normal(d)
    return QuadraticSuite(A=A, theta_star=theta_star, L_values=L_values)


def nonconvex_loss_grad(theta, x_i, y_i):
    """Bounded non-convex per-sample loss f = 1 - exp(-r^2) with
    r = x'theta - y; gradient 2 r exp(-r^2) x."""
    theta = np.asarray(theta, dtype=float)
    x_i = np.asarray(x_i, dtype=float)
    r = float(x_i @ theta - y_i)
    e = np.exp(-r * r)
    return 1.0 - e, 2.0 * r * e * x_i


class RegressionProblem:
    """Optimizer-facing view of a RegressionDataset.

    The bias is folded in as a trailing constant-1 feature, so the
    parameter vector has length p+1 and per-sample smoothness is
    L_i = ||x_i||^2 + 1.
    """

    def __init__(self, data: RegressionDataset):
        self.data = data
        self._X1 = np.hstack([data.X, np.ones((data.X.shape[0], 1))])
        self._X1_test = np.hstack(
            [data.X_test, np.ones((data.X_test.shape[0], 1))]
        )
        self.dim = self._X1.shape[1]
        self.n_samples = self._X1.shape[0]
        self.L = float((self._X1**2).sum(axis=1).max())
        self.theta_star = None  # no common minimizer across outliers

    def theta_init(self) -> np.ndarray:
        return np.zeros(self.dim)

    def losses(self, theta, idx) -> np.ndarray:
        r = self._X1[idx] @ theta - self.data.y[idx]
        return 0.5 * r * r

    def grads(self, theta, idx) -> np.ndarray:
        r = self._X1[idx] @ theta - self.data.y[idx]
        return r[:, None] * self._X1[idx]

    def test_loss(self, theta) -> float:
        r = self._X1_test @ theta - self.data.y_test
        return float(0.5 * np.mean(r * r))


class QuadraticProblem:
    """Optimizer-facing view of a QuadraticSuite; f_i(theta*) = 0 for all i."""

    def __init__(self, suite: QuadraticSuite, theta_init=None):
        self.suite = suite
        self.dim = suite.theta_star.size
        self.n_samples = suite.M
        self.L = suite.L
        self.theta_star = suite.theta_star
        self._theta_init = (
            np.zeros(self.dim) if theta_init is None else np.asarray(theta_init, float)
        )

    def theta_init(self) -> np.ndarray:
        return self._theta_init.copy()

    def losses(self, theta, idx) -> np.ndarray:
        dev = np.asarray(theta, float) - self.theta_star
        Adev = self.suite.A[idx] @ dev
        return 0.5 * Adev @ dev

    def grads(self, theta, idx) -> np.ndarray:
        dev = np.asarray(theta, float) - self.theta_star
        return self.suite.A[idx] @ dev

    def losses_at_opt(self, idx) -> np.ndarray:
        return np.zeros(np.size(idx))

    def mean_loss(self, theta) -> float:
        return float(np.mean(self.losses(theta, np.arange(self.n_samples))))


class NonconvexProblem:
    """Random linear features under the bounded non-convex loss; used for
    the gradient-norm gap diagnostic."""

    def __init__(self, n_samples: int = 256, dim: int = 8, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.X = rng.standard_normal((n_samples, dim))
        theta_true = rng.standard_normal(dim)
        self.y = self.X @ theta_true + 0.1 * rng.standard_normal(n_samples)
        self.dim = dim
        self.n_samples = n_samples
        # |d^2/dr^2 (1 - exp(-r^2))| <= 2, so L_i <= 2 ||x_i||^2
        self.L = float(2.0 * (self.X**2).sum(axis=1).max())
        self.theta_star = None
        self.nonconvex = True

    def theta_init(self) -> np.ndarray:
        return np.zeros(self.dim)

    def losses(self, theta, idx) -> np.ndarray:
        r = self.X[idx] @ theta - self.y[idx]
        return 1.0 - np.exp(-r * r)

    def grads(self, theta, idx) -> np.ndarray:
        r = self.X[idx] @ theta - self.y[idx]
        return (2.0 * r * np.exp(-r * r))[:, None] * self.X[idx]
