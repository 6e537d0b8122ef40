"""Tests for polynomial-kernel PCA against a dense eigendecomposition oracle"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / 'src'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from numpy.testing import assert_allclose  # noqa: E402

from errors import ParameterError, RankError  # noqa: E402
from kpca import (  # noqa: E402
    components_for_variance,
    cumulative_explained_variance,
    explained_variance,
    fit_kpca,
    poly_kernel,
    transform,
)


def oracle_projections(X, k, gamma, coef0=1.0, degree=3):
    """Training projections sqrt(lambda) * v from numpy's eigh on the centered kernel"""
    n = X.shape[0]
    K = (gamma * X @ X.T + coef0) ** degree
    H = np.eye(n) - np.full((n, n), 1.0 / n)
    Kc = H @ K @ H
    vals, vecs = np.linalg.eigh(Kc)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    return vecs[:, :k] * np.sqrt(vals[:k]), vals


def assert_equal_up_to_sign(a, b, atol):
    for j in range(a.shape[1]):
        sign = 1.0 if np.dot(a[:, j], b[:, j]) >= 0 else -1.0
        assert_allclose(a[:, j], sign * b[:, j], atol=atol)


class TestKernel:
    def test_zero_vectors(self):
        assert poly_kernel([0, 0], [0, 0], gamma=7.0, coef0=1.0) == 1.0

    def test_orthogonal(self):
        assert poly_kernel([1, 0], [0, 1], gamma=1.0, coef0=0.0) == 0.0

    def test_hand_value(self):
        assert poly_kernel([1, 2], [3, 4], gamma=0.5, coef0=1.0) == pytest.approx(274.625)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            poly_kernel([1, 2], [1, 2, 3], gamma=1.0, coef0=1.0)


class TestFit:
    def test_single_point_has_no_rank(self):
        with pytest.raises(RankError) as info:
            fit_kpca(np.ones((1, 3)), n_components=1)
        assert info.value.usable_rank == 0

    def test_too_many_components(self):
        with pytest.raises(ParameterError):
            fit_kpca(np.random.default_rng(0).normal(size=(4, 3)), n_components=5)

    def test_five_points_in_the_plane(self):
        X = np.array([[0.0, 0.0], [1.0, 0.5], [-0.5, 1.0], [2.0, -1.0], [0.3, 0.3]])
        model = fit_kpca(X, n_components=2)
        expected, _ = oracle_projections(X, 2, gamma=0.5)
        assert_equal_up_to_sign(model.training_projections, expected, atol=1e-8)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(42)
        checked = 0
        while checked < 50:
            n = int(rng.integers(5, 21))
            d = int(rng.integers(2, 11))
            k = int(rng.integers(1, 4))
            X = rng.normal(size=(n, d))
            expected, vals = oracle_projections(X, k, gamma=1.0 / d)
            gaps = np.abs(np.diff(vals[:k + 1])) / vals[0]
            if np.any(gaps < 1e-6):
                continue
            model = fit_kpca(X, n_components=k)
            assert_equal_up_to_sign(model.training_projections, expected, atol=1e-8 * max(1.0, np.sqrt(vals[0])))
            checked += 1

    def test_duplicated_rows_double_eigenvalues(self):
        X = np.random.default_rng(1).normal(size=(6, 3))
        single = fit_kpca(X, n_components=3)
        double = fit_kpca(np.vstack([X, X]), n_components=3)
        assert_allclose(double.eigenvalues[:3], 2.0 * single.eigenvalues[:3], rtol=1e-8)
        queries = np.random.default_rng(2).normal(size=(4, 3))
        assert_equal_up_to_sign(transform(double, queries), transform(single, queries), atol=1e-8)

    def test_eigenvalues_descending_and_non_negative(self):
        model = fit_kpca(np.random.default_rng(3).normal(size=(12, 4)), n_components=3)
        assert np.all(np.diff(model.eigenvalues) <= 0)
        assert np.all(model.eigenvalues >= 0)

    def test_sum_of_squared_projections_is_eigenvalue(self):
        model = fit_kpca(np.random.default_rng(4).normal(size=(15, 5)), n_components=4)
        assert_allclose((model.training_projections ** 2).sum(axis=0), model.eigenvalues[:4], rtol=1e-8)

    def test_projections_orthogonal_and_centered(self):
        model = fit_kpca(np.random.default_rng(5).normal(size=(15, 5)), n_components=4)
        P = model.training_projections
        gram = P.T @ P
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) <= 1e-8 * np.max(np.diag(gram))
        assert_allclose(P.mean(axis=0), 0.0, atol=1e-8)

    def test_default_gamma(self):
        assert fit_kpca(np.random.default_rng(6).normal(size=(8, 4)), n_components=2).gamma == 0.25


class TestTransform:
    def test_reproduces_training_projections(self):
        X = np.random.default_rng(7).normal(size=(12, 4))
        model = fit_kpca(X, n_components=3)
        assert_allclose(transform(model, X), model.training_projections, atol=1e-8)
        assert_allclose(transform(model, X[5]), model.training_projections[5:6], atol=1e-8)

    def test_dimension_mismatch(self):
        model = fit_kpca(np.random.default_rng(8).normal(size=(8, 4)), n_components=2)
        with pytest.raises(ParameterError):
            transform(model, np.zeros((2, 5)))

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(10, 3))
        query = rng.normal(size=(3, 3))
        a = transform(fit_kpca(X, n_components=2), query)
        b = transform(fit_kpca(X[rng.permutation(10)], n_components=2), query)
        assert_equal_up_to_sign(a, b, atol=1e-7)


class TestExplainedVariance:
    def test_two_eigenvalues(self):
        assert_allclose(cumulative_explained_variance(np.array([3.0, 1.0])), [0.75, 1.0])

    def test_single_positive_eigenvalue(self):
        assert_allclose(cumulative_explained_variance(np.array([2.0, 0.0, 0.0])), [1.0])

    def test_monotone_and_terminal_one(self):
        model = fit_kpca(np.random.default_rng(10).normal(size=(10, 3)), n_components=2)
        ratios = explained_variance(model)
        assert ratios.size == model.usable_rank
        assert np.all(np.diff(ratios) >= 0)
        assert abs(ratios[-1] - 1.0) <= 1e-12

    def test_components_for_variance(self):
        model = fit_kpca(np.random.default_rng(11).normal(size=(10, 3)), n_components=2)
        ratios = explained_variance(model)
        k = components_for_variance(model, 0.9)
        assert ratios[k - 1] >= 0.9 - 1e-12
        assert k == 1 or ratios[k - 2] < 0.9
