"""Synthetic regression data generation."""

import numpy as np
import pytest

from pgfl.datagen import Dataset, gen_client_dataset, gen_cluster_models


def test_zero_spread_collapses_clusters():
    gt = gen_cluster_models(8, 4, 0.0, np.random.default_rng(0))
    for wq in gt.cluster_models:
        np.testing.assert_array_equal(wq, gt.base_model)


def test_single_cluster_scaled_copy():
    gt = gen_cluster_models(5, 1, 0.3, np.random.default_rng(1))
    ratio = gt.cluster_models[0] / gt.base_model
    assert np.allclose(ratio, ratio[0])
    assert abs(ratio[0] - 1.0) < 0.3


def test_pairwise_distance_bounded_by_spread():
    # |gamma_q - gamma_r| < 2 * spread bounds the relative model distance.
    gt = gen_cluster_models(60, 3, 0.15, np.random.default_rng(2))
    base_norm = np.linalg.norm(gt.base_model)
    for i in range(3):
        for j in range(3):
            dist = np.linalg.norm(gt.cluster_models[i] - gt.cluster_models[j])
            assert dist <= 2 * 0.15 * base_norm + 1e-12


def test_cluster_models_deterministic():
    a = gen_cluster_models(10, 3, 0.15, np.random.default_rng(5))
    b = gen_cluster_models(10, 3, 0.15, np.random.default_rng(5))
    np.testing.assert_array_equal(a.base_model, b.base_model)
    for x, y in zip(a.cluster_models, b.cluster_models):
        np.testing.assert_array_equal(x, y)


def test_invalid_args_rejected():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        gen_cluster_models(0, 1, 0.1, rng)
    with pytest.raises(ValueError):
        gen_cluster_models(4, 1, -0.1, rng)
    with pytest.raises(ValueError):
        gen_client_dataset(np.ones(3), 0, 0.1, rng)
    with pytest.raises(ValueError):
        gen_client_dataset(np.ones(3), 2, -1.0, rng)


def test_noiseless_square_system_recovers_model():
    # With noise_std = 0 and D_k = d the least-squares solution is exact.
    rng = np.random.default_rng(3)
    w_star = rng.standard_normal(12)
    ds = gen_client_dataset(w_star, 12, 0.0, rng)
    w_hat, *_ = np.linalg.lstsq(ds.X, ds.y, rcond=None)
    assert np.linalg.norm(w_hat - w_star) < 1e-10


def test_single_row_dataset():
    ds = gen_client_dataset(np.ones(4), 1, 0.1, np.random.default_rng(0))
    assert ds.X.shape == (1, 4)
    assert ds.y.shape == (1,)


def test_underdetermined_shapes():
    for d_k in range(2, 10):
        ds = gen_client_dataset(np.ones(60), d_k, 0.1, np.random.default_rng(d_k))
        assert ds.num_samples == d_k
        assert ds.dim == 60


def test_residual_variance_matches_noise():
    # Empirical mean squared residual vs X w* approximates noise_std^2.
    rng = np.random.default_rng(11)
    w_star = rng.standard_normal(6)
    noise_std = 0.7
    ds = gen_client_dataset(w_star, 20000, noise_std, rng)
    resid = ds.y - ds.X @ w_star
    assert abs(np.mean(resid**2) - noise_std**2) < 0.05 * noise_std**2


def test_dataset_shape_validation():
    with pytest.raises(ValueError):
        Dataset(X=np.ones((3, 2)), y=np.ones(2))


def test_generation_deterministic():
    w = np.arange(5, dtype=float)
    a = gen_client_dataset(w, 4, 0.5, np.random.default_rng(9))
    b = gen_client_dataset(w, 4, 0.5, np.random.default_rng(9))
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
