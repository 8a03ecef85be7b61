"""Spline basis evaluation: values, matrices, curve evaluation, supports."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsat.splines import (
    BasisMatrix,
    KnotVector,
    basis_matrix,
    basis_value,
    cox_de_boor,
    eval_curve,
    support_interval,
)


def clamped_uniform(p: int, n: int, lo: float = 0.0, hi: float = 1.0) -> KnotVector:
    interior = np.linspace(lo, hi, n - p + 1)[1:-1]
    tau = np.concatenate([np.full(p + 1, lo), interior, np.full(p + 1, hi)])
    return KnotVector(tau, p)


def random_clamped(rng, p: int, n: int) -> KnotVector:
    interior = np.sort(rng.uniform(0.05, 0.95, size=n - p - 1))
    # keep gaps bounded away from zero so the vector is well-conditioned
    interior = np.cumsum(np.diff(np.concatenate([[0.0], interior])) + 1e-3)
    interior = interior / (interior[-1] + 0.05)
    tau = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(tau, p)


class TestKnotVector:
    def test_counts(self):
        kv = clamped_uniform(3, 10)
        assert kv.basis_count == 10
        assert kv.tau.size == 10 + 3 + 1
        assert kv.domain == (0.0, 1.0)

    def test_rejects_decreasing(self):
        tau = np.array([0, 0, 1, 0.5, 2, 2], dtype=float)
        with pytest.raises(ValueError, match="non-decreasing"):
            KnotVector(tau, 1)

    def test_rejects_unclamped(self):
        tau = np.array([0, 0.1, 0.2, 0.5, 1.0, 1.1, 1.2, 1.3], dtype=float)
        with pytest.raises(ValueError, match="clamped"):
            KnotVector(tau, 2)

    def test_rejects_degenerate_basis_count(self):
        tau = np.array([0, 0, 0, 1, 1, 1], dtype=float)
        with pytest.raises(ValueError, match="degenerate"):
            KnotVector(tau, 2)


class TestBasisValue:
    def test_degree0_indicator(self):
        kv = KnotVector(np.array([0.0, 1.0, 2.0]), 0)
        assert basis_value(0, 0, 0.5, kv) == 1.0
        assert basis_value(1, 0, 0.5, kv) == 0.0

    def test_hat_apex(self):
        kv = KnotVector(np.array([0.0, 0.0, 1.0, 2.0, 2.0]), 1)
        assert basis_value(1, 1, 1.0, kv) == 1.0

    def test_uniform_quadratic_midpoint(self):
        # Hand-unrolled recursion on knots (0,1,2,3) gives exactly 3/4.
        assert cox_de_boor([0.0, 1.0, 2.0, 3.0], 0, 2, 1.5) == 0.75
        kv = KnotVector(np.array([0, 0, 0, 1, 2, 3, 4, 4, 4], dtype=float), 2)
        assert basis_value(2, 2, 1.5, kv) == pytest.approx(0.75, abs=1e-15)

    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(3)
        for p in (1, 2, 3, 4):
            kv = random_clamped(rng, p, p + 5)
            for xi in rng.uniform(0.0, 1.0, size=20):
                for i in range(kv.basis_count):
                    fast = basis_value(i, p, xi, kv)
                    naive = cox_de_boor(kv.tau, i, p, xi)
                    assert fast == pytest.approx(naive, abs=1e-12)

    def test_right_endpoint_closure(self):
        kv = clamped_uniform(3, 8)
        assert basis_value(7, 3, 1.0, kv) == pytest.approx(1.0, abs=1e-15)
        row = basis_matrix(np.array([1.0]), kv).values[0]
        assert row.sum() == pytest.approx(1.0, abs=1e-12)

    def test_degree_mismatch(self):
        kv = clamped_uniform(2, 6)
        with pytest.raises(ValueError, match="degree"):
            basis_value(0, 3, 0.5, kv)

    def test_index_out_of_range(self):
        kv = clamped_uniform(2, 6)
        with pytest.raises(IndexError):
            basis_value(6, 2, 0.5, kv)

    def test_outside_domain(self):
        kv = clamped_uniform(2, 6)
        with pytest.raises(ValueError, match="domain"):
            basis_value(0, 2, 1.5, kv)

    def test_recursion_consistency_randomized(self):
        # Degree-p value equals the two-term combination of degree p-1 values.
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = int(rng.integers(1, 5))
            kv = random_clamped(rng, p, p + 6)
            tau = kv.tau
            i = int(rng.integers(0, kv.basis_count))
            xi = float(rng.uniform(0.0, 1.0))
            left = 0.0
            if tau[i + p] != tau[i]:
                left = (xi - tau[i]) / (tau[i + p] - tau[i]) * cox_de_boor(tau, i, p - 1, xi)
            right = 0.0
            if tau[i + p + 1] != tau[i + 1]:
                right = (
                    (tau[i + p + 1] - xi)
                    / (tau[i + p + 1] - tau[i + 1])
                    * cox_de_boor(tau, i + 1, p - 1, xi)
                )
            assert basis_value(i, p, xi, kv) == pytest.approx(left + right, abs=1e-12)


class TestBasisMatrix:
    def test_rows_sum_to_one_small(self):
        kv = clamped_uniform(1, 3)
        mat = basis_matrix(np.full(5, 0.3), kv)
        assert np.allclose(mat.values.sum(axis=1), 1.0)

    def test_left_boundary_row(self):
        kv = clamped_uniform(3, 9)
        row = basis_matrix(np.array([0.0]), kv).values[0]
        expected = np.zeros(9)
        expected[0] = 1.0
        assert np.allclose(row, expected)

    def test_random_vectors_partition_of_unity(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            p = int(rng.integers(1, 6))
            kv = random_clamped(rng, p, p + int(rng.integers(3, 12)))
            grid = rng.uniform(0.0, 1.0, size=100)
            values = basis_matrix(grid, kv).values
            assert np.abs(values.sum(axis=1) - 1.0).max() < 1e-10
            assert values.min() >= 0.0
            assert values.max() <= 1.0 + 1e-12

    def test_local_support_on_dense_grid(self):
        rng = np.random.default_rng(9)
        kv = random_clamped(rng, 3, 9)
        grid = np.linspace(0.0, 1.0, 400)
        values = basis_matrix(grid, kv).values
        for i in range(kv.basis_count):
            lo, hi = support_interval(i, kv)
            outside = (grid < lo) | (grid > hi)
            # half-open on the right except at the domain end
            outside |= (grid == hi) & (hi < kv.domain[1])
            assert np.all(values[outside, i] == 0.0)

    def test_empty_grid_rejected(self):
        kv = clamped_uniform(2, 6)
        with pytest.raises(ValueError, match="non-empty"):
            basis_matrix(np.array([]), kv)

    def test_returns_eval_points(self):
        kv = clamped_uniform(2, 6)
        grid = np.linspace(0, 1, 7)
        mat = basis_matrix(grid, kv)
        assert isinstance(mat, BasisMatrix)
        assert np.array_equal(mat.eval_points, grid)


class TestEvalCurve:
    def test_constant_reproduction(self):
        kv = clamped_uniform(3, 9)
        coeffs = np.full(9, 3.7)
        for xi in (0.0, 0.25, 0.6, 1.0):
            assert eval_curve(coeffs, kv, xi) == pytest.approx(3.7, abs=1e-12)

    def test_linear_precision_via_greville(self):
        kv = clamped_uniform(3, 12)
        p = kv.degree
        greville = np.array(
            [kv.tau[i + 1 : i + p + 1].mean() for i in range(kv.basis_count)]
        )
        coeffs = 2.5 * greville - 1.25
        grid = np.linspace(0.0, 1.0, 257)
        values = eval_curve(coeffs, kv, grid)
        assert np.abs(values - (2.5 * grid - 1.25)).max() < 1e-12

    def test_one_hot_equals_basis_value(self):
        rng = np.random.default_rng(13)
        kv = random_clamped(rng, 2, 7)
        xi = 0.37
        for i in range(kv.basis_count):
            coeffs = np.zeros(kv.basis_count)
            coeffs[i] = 1.0
            assert eval_curve(coeffs, kv, xi) == pytest.approx(
                basis_value(i, 2, xi, kv), abs=1e-14
            )

    def test_coefficient_count_mismatch(self):
        kv = clamped_uniform(2, 6)
        with pytest.raises(ValueError, match="coefficients"):
            eval_curve(np.ones(5), kv, 0.5)


class TestSupportInterval:
    def test_first_basis(self):
        tau = np.concatenate([np.zeros(3), [0.2, 0.5], np.ones(3)])
        kv = KnotVector(tau, 2)
        assert support_interval(0, kv) == (0.0, 0.2)

    def test_uniform_width(self):
        tau = np.concatenate([np.zeros(3), np.arange(1.0, 6.0), np.full(3, 6.0)])
        kv = KnotVector(tau, 2)
        lo, hi = support_interval(3, kv)
        assert hi - lo == pytest.approx(3.0)

    def test_last_basis_reaches_domain_end(self):
        kv = clamped_uniform(3, 9)
        _, hi = support_interval(8, kv)
        assert hi == kv.domain[1]

    def test_out_of_range(self):
        kv = clamped_uniform(2, 6)
        with pytest.raises(IndexError):
            support_interval(-1, kv)


@settings(max_examples=40, deadline=None)
@given(
    p=st.integers(min_value=1, max_value=5),
    extra=st.integers(min_value=3, max_value=10),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_partition_of_unity_property(p, extra, seed):
    rng = np.random.default_rng(seed)
    kv = random_clamped(rng, p, p + extra)
    grid = rng.uniform(0.0, 1.0, size=64)
    values = basis_matrix(grid, kv).values
    assert np.abs(values.sum(axis=1) - 1.0).max() < 1e-10
    assert values.min() >= 0.0
