"""Tests for the brute-force verifiers themselves."""

import numpy as np
import pytest

from reweight.core import ConfigError, capped_optimal_weights
from reweight.oracle import (
    brute_force_optimal_weights,
    finite_diff_grad,
    kkt_residual,
    project_capped_simplex,
)


class TestProjection:
    def test_feasible_point_unchanged(self):
        w = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_capped_simplex(w, cap=0.6), w, atol=1e-12)

    def test_result_is_feasible(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            b = int(rng.integers(2, 20))
            cap = float(rng.uniform(1.0 / b, 1.0))
            v = rng.normal(scale=3.0, size=b)
            w = project_capped_simplex(v, cap)
            assert abs(w.sum() - 1.0) <= 1e-9
            assert np.all(w >= -1e-12)
            assert np.all(w <= cap + 1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=6)
        w = project_capped_simplex(v, cap=0.4)
        np.testing.assert_allclose(project_capped_simplex(w, cap=0.4), w, atol=1e-9)

    def test_shift_structure(self):
        # Interior coordinates of the projection differ from v by a common shift.
        v = np.array([0.9, 0.1, 0.3, -0.2])
        cap = 0.5
        w = project_capped_simplex(v, cap)
        interior = (w > 1e-9) & (w < cap - 1e-9)
        shifts = (v - w)[interior]
        assert np.abs(shifts - shifts.mean()).max() <= 1e-9

    def test_infeasible_cap_rejected(self):
        with pytest.raises(ConfigError):
            project_capped_simplex([0.5, 0.5], cap=0.3)


class TestBruteForceWeights:
    def test_equal_gaps_uniform(self):
        w = brute_force_optimal_weights(np.zeros(6), r=1.0, cap=0.5)
        np.testing.assert_allclose(w, np.full(6, 1 / 6), atol=1e-8)

    def test_matches_water_filling(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(50):
            b = int(rng.integers(2, 9))
            r = float(10.0 ** rng.uniform(-1, 1))
            h = rng.uniform(-1.0, 1.0, size=b)
            fast = capped_optimal_weights(h, r, 2.0 / b)
            slow = brute_force_optimal_weights(h, r, 2.0 / b)
            worst = max(worst, float(np.abs(fast - slow).max()))
        assert worst <= 1e-6

    def test_degenerate_limit(self):
        h = np.array([0.3, -0.9, 0.8, -0.1])
        w = brute_force_optimal_weights(h, r=1e-6, cap=0.5)
        np.testing.assert_allclose(w, [0.5, 0.0, 0.5, 0.0], atol=1e-3)

    def test_kkt_residual_small(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            b = int(rng.integers(3, 9))
            r = float(10.0 ** rng.uniform(-1, 1))
            h = rng.uniform(-1.0, 1.0, size=b)
            w = brute_force_optimal_weights(h, r, 2.0 / b)
            assert kkt_residual(w, h, r, 2.0 / b) <= 1e-6

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ConfigError):
            brute_force_optimal_weights([0.0, 1.0], r=0.0, cap=1.0)
        with pytest.raises(ConfigError):
            brute_force_optimal_weights([0.0, 1.0], r=1.0, cap=0.2)


class TestFiniteDiff:
    def test_quadratic_is_exact_to_roundoff(self):
        theta = np.array([1.0, 0.0, 0.0])
        g = finite_diff_grad(lambda t: float(t @ t), theta, epsilon=1e-5)
        np.testing.assert_allclose(g, [2.0, 0.0, 0.0], atol=1e-8)

    def test_linear_function(self):
        c = np.array([3.0, -2.0, 0.5])
        g = finite_diff_grad(lambda t: float(c @ t), np.zeros(3))
        np.testing.assert_allclose(g, c, atol=1e-8)

    def test_bad_epsilon_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda t: 0.0, np.zeros(2), epsilon=0.0)
