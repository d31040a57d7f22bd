"""Closed-form reference solutions for validating the federation.

With tau = 0, privacy off, and full participation on a complete server
graph, the iteration's fixed point is the per-cluster pooled ridge solve in
which each client's term carries the reciprocal of its server-cluster group
size. These oracles compute that target directly.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

import numpy as np

from .datagen import Dataset
from .topology import Topology

__all__ = ["matched_cluster_optima", "max_pairwise_sq_distance"]


def matched_cluster_optima(
    topology: Topology,
    datasets: Sequence[Dataset],
    lambda_over_Cs: float,
) -> np.ndarray:
    """Per-cluster minimizers with the algorithm's 1/|C_{s,q}| weights.

    Cluster q solves
        [ sum_s (1/m_sq) sum_{k in C_sq} (2/D_k) X_k^T X_k
          + sum_{s: m_sq>0} 2 lambda' I ] w
        = sum_s (1/m_sq) sum_{k in C_sq} (2/D_k) X_k^T y_k
    where m_sq counts cluster-q clients at server s.
    """
    d = datasets[0].dim
    Q = topology.num_clusters
    out = np.zeros((Q, d))
    for q in range(Q):
        A = np.zeros((d, d))
        b = np.zeros(d)
        reg = 0.0
        for s in range(topology.num_servers):
            group = [
                k
                for k in topology.clients_of(s)
                if topology.client_cluster[k] == q
            ]
            if not group:
                continue
            m = len(group)
            for k in group:
                X, y = datasets[k].X, datasets[k].y
                D_k = datasets[k].num_samples
                A += (2.0 / D_k) * (X.T @ X) / m
                b += (2.0 / D_k) * (X.T @ y) / m
            reg += 2.0 * lambda_over_Cs
        A += reg * np.eye(d)
        out[q] = np.linalg.solve(A, b)
    return out


def max_pairwise_sq_distance(models: np.ndarray) -> float:
    """Largest squared distance between any two rows."""
    models = np.asarray(models)
    if models.shape[0] < 2:
        return 0.0
    return max(
        float(np.sum((models[i] - models[j]) ** 2))
        for i, j in combinations(range(models.shape[0]), 2)
    )
