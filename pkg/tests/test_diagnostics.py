"""Tests for the per-step theory diagnostics."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reweight.diagnostics import (
    StepDiagnostics,
    delta_t,
    grad_gap_term,
    mu_t,
    theorem1_bound,
)


def random_simplex(rng, b):
    w = rng.uniform(0.0, 1.0, size=b)
    return w / w.sum()


class TestDeltaT:
    def test_uniform_weights_zero(self):
        gaps_now = np.array([1.0, 3.0, 7.0])
        assert delta_t(gaps_now, np.zeros(3), np.full(3, 1 / 3)) == pytest.approx(0.0)

    def test_hand_arithmetic(self):
        # (0.5-0.25)*0 + (0.5-0.75)*2 = -0.5
        assert delta_t([0.0, 2.0], [0.0, 0.0], [0.25, 0.75]) == pytest.approx(-0.5)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            delta_t([1.0, 2.0], [0.0, 0.0], [1.0])

    def test_comonotone_nonpositive(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            b = int(rng.integers(2, 33))
            gaps = np.sort(rng.uniform(0.0, 5.0, size=b))
            w = np.sort(random_simplex(rng, b))
            assert delta_t(gaps, np.zeros(b), w) <= 1e-12

    @given(
        perm_seed=st.integers(min_value=0, max_value=10**6),
        data_seed=st.integers(min_value=0, max_value=10**6),
    )
    def test_joint_permutation_invariance(self, perm_seed, data_seed):
        rng = np.random.default_rng(data_seed)
        b = 12
        gaps = rng.uniform(0.0, 5.0, size=b)
        w = random_simplex(rng, b)
        perm = np.random.default_rng(perm_seed).permutation(b)
        assert delta_t(gaps, np.zeros(b), w) == pytest.approx(
            delta_t(gaps[perm], np.zeros(b), w[perm])
        )


class TestMuT:
    def test_uniform_weights_zero(self):
        assert mu_t([1.0, 2.0], [5.0, 0.0], [0.5, 0.5]) == pytest.approx(0.0)

    def test_unchanged_losses_zero(self):
        f = [1.0, 2.0, 3.0]
        assert mu_t(f, f, [0.6, 0.3, 0.1]) == pytest.approx(0.0)

    def test_hand_arithmetic(self):
        # diffs [1, -1], w [0.75, 0.25]: (0.5-0.75)*1 + (0.5-0.25)*(-1) = -0.5
        assert mu_t([2.0, 0.0], [1.0, 1.0], [0.75, 0.25]) == pytest.approx(-0.5)


class TestGradGapTerm:
    def test_uniform_weights_zero(self):
        assert grad_gap_term([4.0, 9.0], [0.5, 0.5]) == pytest.approx(0.0)

    def test_hand_arithmetic(self):
        # (0.5-0.25)*4 + (0.5-0.75)*0 = 1.0
        assert grad_gap_term([4.0, 0.0], [0.25, 0.75]) == pytest.approx(1.0)

    def test_comonotone_nonpositive(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            b = int(rng.integers(2, 17))
            sq = np.sort(rng.uniform(0.0, 9.0, size=b))
            w = np.sort(random_simplex(rng, b))
            assert grad_gap_term(sq, w) <= 1e-12

    def test_negative_norms_rejected(self):
        with pytest.raises(ValueError):
            grad_gap_term([-1.0, 1.0], [0.5, 0.5])


class TestTheorem1Bound:
    def test_zero_deltas_classic_bound(self):
        assert theorem1_bound(2.0, 1.0, 4, np.zeros(4)) == pytest.approx(4.0)

    def test_hand_arithmetic(self):
        # 8*1*4/8 + (-0.1) = 3.9
        assert theorem1_bound(1.0, 4.0, 8, np.full(8, -0.1)) == pytest.approx(3.9)

    def test_negative_deltas_tighten(self):
        base = theorem1_bound(1.0, 1.0, 10, np.zeros(10))
        tightened = theorem1_bound(1.0, 1.0, 10, np.full(10, -0.2))
        assert tightened < base

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            theorem1_bound(1.0, 1.0, 5, np.zeros(4))


class TestStepDiagnostics:
    def test_csv_row_serializes_none_as_empty(self):
        rec = StepDiagnostics(
            step=3,
            train_loss=1.5,
            test_loss=None,
            r=1.0,
            w_max=0.3,
            w_min=0.1,
            delta=None,
            mu=None,
            grad_gap=-0.25,
            theta_dist_sq=None,
        )
        row = rec.csv_row()
        assert row[0] == "3"
        assert row[1] == repr(1.5)
        assert row[2] == ""
        assert row[6] == ""
        assert row[8] == repr(-0.25)
