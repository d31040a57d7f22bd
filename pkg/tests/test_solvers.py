"""Client prox solvers against independent numerical oracles."""

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import expit

from pgfl.datagen import Dataset
from pgfl.errors import SolverError
from pgfl.solvers import (
    CachedRidgeProx,
    ProxProblem,
    clipped_sample_gradient,
    logistic_primal_solve,
    ridge_primal_solve,
)


def _ridge_objective(w, X, y, lam_cs, dual, anchor, rho):
    D = X.shape[0]
    diff = w - anchor
    return (
        np.sum((y - X @ w) ** 2) / D
        + lam_cs * w @ w
        - dual @ diff
        + 0.5 * rho * diff @ diff
    )


def _ridge_gradient(w, X, y, lam_cs, dual, anchor, rho):
    D = X.shape[0]
    return (
        2.0 / D * X.T @ (X @ w - y)
        + 2.0 * lam_cs * w
        - dual
        + rho * (w - anchor)
    )


def _random_problem(rng, d=6, D=4, lam_cs=0.02, rho=1.3, clip=1.0):
    X = rng.standard_normal((D, d))
    y = rng.standard_normal(D)
    return ProxProblem(
        dataset=Dataset(X=X, y=y),
        dual=rng.standard_normal(d),
        anchor=rng.standard_normal(d),
        rho=rho,
        lambda_over_Cs=lam_cs,
        clip_bound=clip,
    )


def test_scalar_example():
    # One sample x=1, y=2, lam=0, rho=2, dual=0, anchor=0: minimize
    # (2-w)^2 + w^2, solved at w=1.
    p = ProxProblem(
        dataset=Dataset(X=np.array([[1.0]]), y=np.array([2.0])),
        dual=np.zeros(1),
        anchor=np.zeros(1),
        rho=2.0,
        lambda_over_Cs=0.0,
    )
    w = ridge_primal_solve(p)
    assert w.shape == (1,)
    assert abs(w[0] - 1.0) < 1e-12


def test_prox_of_ridge_solution_is_fixed_point():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((8, 5))
    y = rng.standard_normal(8)
    lam_cs = 0.05
    # Unconstrained ridge minimizer with the same weights.
    A = (2.0 / 8) * X.T @ X + 2.0 * lam_cs * np.eye(5)
    b = (2.0 / 8) * X.T @ y
    w_ridge = np.linalg.solve(A, b)
    p = ProxProblem(
        dataset=Dataset(X=X, y=y),
        dual=np.zeros(5),
        anchor=w_ridge,
        rho=3.7,
        lambda_over_Cs=lam_cs,
    )
    np.testing.assert_allclose(ridge_primal_solve(p), w_ridge, atol=1e-10)


def test_ridge_against_first_order_oracle_100_instances():
    rng = np.random.default_rng(42)
    for _ in range(100):
        d = int(rng.integers(2, 8))
        D = int(rng.integers(1, 10))
        p = _random_problem(rng, d=d, D=D, rho=float(rng.uniform(0.3, 4.0)))
        w = ridge_primal_solve(p)
        args = (p.dataset.X, p.dataset.y, p.lambda_over_Cs, p.dual, p.anchor, p.rho)
        res = minimize(
            _ridge_objective,
            np.zeros(d),
            jac=_ridge_gradient,
            args=args,
            method="L-BFGS-B",
            options={"gtol": 1e-12, "ftol": 1e-16, "maxiter": 5000},
        )
        assert np.linalg.norm(w - res.x) < 1e-7


def test_ridge_stationarity_identity():
    # The prox solution satisfies w = anchor + (dual - grad_f(w)) / rho with
    # grad_f the data + regularizer gradient.
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = _random_problem(rng)
        w = ridge_primal_solve(p)
        grad_f = (
            2.0 / p.dataset.num_samples * p.dataset.X.T @ (p.dataset.X @ w - p.dataset.y)
            + 2.0 * p.lambda_over_Cs * w
        )
        reconstructed = p.anchor + (p.dual - grad_f) / p.rho
        np.testing.assert_allclose(w, reconstructed, atol=1e-9)


def test_cached_prox_matches_one_shot():
    rng = np.random.default_rng(2)
    p = _random_problem(rng)
    cached = CachedRidgeProx(p.dataset, p.rho, p.lambda_over_Cs)
    np.testing.assert_allclose(
        cached.solve(p.dual, p.anchor), ridge_primal_solve(p), atol=1e-13
    )


def _logistic_newton_oracle(p, clip=False, tol=1e-12):
    """Plain full-Hessian Newton, written independently of the package."""
    X, y = p.dataset.X, p.dataset.y
    D, d = X.shape
    w = np.zeros(d)
    caps = p.clip_bound / np.maximum(np.linalg.norm(X, axis=1), 1e-300)
    for _ in range(200):
        t = X @ w
        sig = expit(t)
        h = sig - y
        curv = sig * (1 - sig)
        if clip:
            over = np.abs(h) > caps
            h = np.clip(h, -caps, caps)
            curv = np.where(over, 0.0, curv)
        grad = X.T @ h / D + 2 * p.lambda_over_Cs * w - p.dual + p.rho * (w - p.anchor)
        if np.linalg.norm(grad) < tol:
            return w
        H = X.T @ (X * (curv / D)[:, None]) + (2 * p.lambda_over_Cs + p.rho) * np.eye(d)
        w = w - np.linalg.solve(H, grad)
    return w


def test_logistic_against_second_order_oracle():
    rng = np.random.default_rng(7)
    for _ in range(30):
        d = int(rng.integers(2, 6))
        D = int(rng.integers(2, 8))
        X = rng.standard_normal((D, d))
        y = (rng.random(D) < 0.5).astype(float)
        p = ProxProblem(
            dataset=Dataset(X=X, y=y),
            dual=0.3 * rng.standard_normal(d),
            anchor=rng.standard_normal(d),
            rho=float(rng.uniform(0.5, 3.0)),
            lambda_over_Cs=0.01,
            clip_bound=100.0,  # inactive: compare the plain objective
        )
        w = logistic_primal_solve(p, tol=1e-10)
        w_ref = _logistic_newton_oracle(p)
        assert np.linalg.norm(w - w_ref) < 1e-6


def test_logistic_with_clipping_matches_clipped_oracle():
    rng = np.random.default_rng(8)
    for _ in range(20):
        d, D = 5, 6
        X = 3.0 * rng.standard_normal((D, d))  # large rows so clipping binds
        y = (rng.random(D) < 0.5).astype(float)
        p = ProxProblem(
            dataset=Dataset(X=X, y=y),
            dual=0.2 * rng.standard_normal(d),
            anchor=0.5 * rng.standard_normal(d),
            rho=1.0,
            lambda_over_Cs=0.01,
            clip_bound=0.6,
        )
        w = logistic_primal_solve(p, tol=1e-10, clip_in_solver=True)
        w_ref = _logistic_newton_oracle(p, clip=True)
        assert np.linalg.norm(w - w_ref) < 1e-6


def test_logistic_clipped_stationarity_via_sample_gradients():
    # At the solution, the mean clipped per-sample gradient (plus regularizer,
    # dual, prox terms) vanishes; cross-check with clipped_sample_gradient.
    rng = np.random.default_rng(9)
    p = _random_problem(rng, d=4, D=5, clip=0.5)
    p.dataset.y = (rng.random(5) < 0.5).astype(float)
    w = logistic_primal_solve(p, tol=1e-11, clip_in_solver=True)
    gsum = np.zeros(4)
    for x, y in zip(p.dataset.X, p.dataset.y):
        gsum += clipped_sample_gradient("logistic", x, y, w, 0.5)
    full = gsum / 5 + 2 * p.lambda_over_Cs * w - p.dual + p.rho * (w - p.anchor)
    assert np.linalg.norm(full) < 1e-9


def test_logistic_zero_feature_sample():
    p = ProxProblem(
        dataset=Dataset(X=np.zeros((1, 3)), y=np.array([1.0])),
        dual=np.zeros(3),
        anchor=np.zeros(3),
        rho=1.0,
        lambda_over_Cs=0.0,
    )
    w = logistic_primal_solve(p, tol=1e-10)
    np.testing.assert_allclose(w, np.zeros(3), atol=1e-10)


def test_logistic_identical_labels_stays_finite():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((6, 4))
    p = ProxProblem(
        dataset=Dataset(X=X, y=np.ones(6)),
        dual=np.zeros(4),
        anchor=np.zeros(4),
        rho=0.8,
        lambda_over_Cs=0.0,
        clip_bound=50.0,
    )
    w = logistic_primal_solve(p, tol=1e-8)
    assert np.isfinite(w).all()
    assert np.linalg.norm(w) < 10.0  # prox keeps it near the anchor


def test_logistic_bad_labels_rejected():
    p = ProxProblem(
        dataset=Dataset(X=np.ones((2, 2)), y=np.array([0.0, 2.0])),
        dual=np.zeros(2),
        anchor=np.zeros(2),
        rho=1.0,
        lambda_over_Cs=0.0,
    )
    with pytest.raises(ValueError):
        logistic_primal_solve(p)


def test_solver_error_payload():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((6, 4))
    y = (rng.random(6) < 0.5).astype(float)
    p = ProxProblem(
        dataset=Dataset(X=X, y=y),
        dual=rng.standard_normal(4),
        anchor=rng.standard_normal(4),
        rho=1.0,
        lambda_over_Cs=0.0,
    )
    with pytest.raises(SolverError) as exc_info:
        logistic_primal_solve(p, tol=1e-14, max_iters=1)
    err = exc_info.value
    assert err.last_iterate.shape == (4,)
    assert err.grad_norm > 0


def test_clip_small_gradient_unchanged():
    x = np.array([1.0, 0.0])
    w = np.array([0.0, 0.0])
    # ridge gradient: 2 (x.w - y) x = [-2, 0] for y = 1, norm 2
    g = clipped_sample_gradient("ridge", x, 1.0, w, C=5.0)
    np.testing.assert_allclose(g, [-2.0, 0.0])


def test_clip_at_twice_bound_halves():
    x = np.array([1.0, 0.0])
    w = np.zeros(2)
    g = clipped_sample_gradient("ridge", x, 1.0, w, C=1.0)  # raw norm 2
    np.testing.assert_allclose(g, [-1.0, 0.0])
    assert abs(np.linalg.norm(g) - 1.0) < 1e-12


def test_clip_norm_never_exceeds_bound():
    rng = np.random.default_rng(5)
    for _ in range(200):
        x = rng.standard_normal(6) * rng.uniform(0.1, 10)
        w = rng.standard_normal(6)
        y = float(rng.integers(0, 2))
        kind = "ridge" if rng.random() < 0.5 else "logistic"
        g = clipped_sample_gradient(kind, x, y, w, C=0.7)
        assert np.linalg.norm(g) <= 0.7 + 1e-12


def test_logistic_natural_bound_never_clips():
    # |sigma(t) - y| <= 1, so ||x|| <= C means the raw gradient obeys the cap.
    rng = np.random.default_rng(6)
    for _ in range(100):
        x = rng.standard_normal(5)
        x = x / np.linalg.norm(x) * rng.uniform(0, 1.0)
        w = rng.standard_normal(5)
        y = float(rng.integers(0, 2))
        raw = (expit(x @ w) - y) * x
        g = clipped_sample_gradient("logistic", x, y, w, C=1.0)
        np.testing.assert_array_equal(g, raw)


def test_problem_validation():
    ds = Dataset(X=np.ones((2, 3)), y=np.ones(2))
    with pytest.raises(ValueError):
        ProxProblem(ds, np.zeros(3), np.zeros(3), rho=0.0, lambda_over_Cs=0.0)
    with pytest.raises(ValueError):
        ProxProblem(ds, np.zeros(2), np.zeros(3), rho=1.0, lambda_over_Cs=0.0)
    with pytest.raises(ValueError):
        ProxProblem(ds, np.zeros(3), np.zeros(3), rho=1.0, lambda_over_Cs=-0.1)
