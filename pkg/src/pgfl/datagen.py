"""Synthetic regression data from cluster-specific ground-truth models.

Each cluster owns a perturbed copy of one base model; each client draws a
small Gaussian design matrix and noisy responses from its cluster's model.
Client sample counts are deliberately below the model dimension so no
client can identify the model alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Dataset", "ClusterGroundTruth", "gen_cluster_models", "gen_client_dataset"]


@dataclass
class Dataset:
    """Design matrix X (rows are samples) and response/label vector y."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries"
            )
        if self.X.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")

    @property
    def num_samples(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass
class ClusterGroundTruth:
    """Base model and the per-cluster models derived from it."""

    base_model: np.ndarray
    cluster_models: list[np.ndarray]

    @property
    def num_clusters(self) -> int:
        return len(self.cluster_models)


def gen_cluster_models(
    d: int, Q: int, spread: float, rng: np.random.Generator
) -> ClusterGroundTruth:
    """Draw a base model and Q scaled copies.

    The base model has standard normal entries; cluster q's model is
    (1 + gamma_q) * base with gamma_q uniform on (-spread, spread),
    independent per cluster. spread = 0 collapses all clusters onto the
    base model.
    """
    if d < 1 or Q < 1:
        raise ValueError("d and Q must be >= 1")
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    base = rng.standard_normal(d)
    gammas = rng.uniform(-spread, spread, size=Q)
    models = [(1.0 + g) * base for g in gammas]
    return ClusterGroundTruth(base_model=base, cluster_models=models)


def gen_client_dataset(
    w_star: np.ndarray, D_k: int, noise_std: float, rng: np.random.Generator
) -> Dataset:
    """One client's regression data: X ~ N(0,1), y = X w* + N(0, noise_std^2)."""
    if D_k < 1:
        raise ValueError(f"D_k must be >= 1, got {D_k}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    w_star = np.asarray(w_star, dtype=float)
    X = rng.standard_normal((D_k, w_star.shape[0]))
    y = X @ w_star + noise_std * rng.standard_normal(D_k)
    return Dataset(X=X, y=y)
