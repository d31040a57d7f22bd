"""Evaluation quantities: NMSD, test accuracy, Monte Carlo aggregation."""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from . import rng as rng_mod
from .datagen import ClusterGroundTruth, Dataset
from .topology import Topology

__all__ = [
    "MonteCarloResult",
    "RoundRecord",
    "monte_carlo",
    "nmsd",
    "test_accuracy",
]


@dataclasses.dataclass
class RoundRecord:
    """One iteration's scalar metric, plus the privacy spend when tracked."""

    iteration: int
    metric: str  # "nmsd" or "accuracy"
    value: float
    epsilon: Optional[float] = None

    def __post_init__(self) -> None:
        if self.metric not in ("nmsd", "accuracy"):
            raise ValueError(f"unknown metric: {self.metric!r}")
        if self.metric == "nmsd" and self.value < 0:
            raise ValueError("nmsd must be nonnegative")
        if self.metric == "accuracy" and not 0.0 <= self.value <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")


def nmsd(
    client_models: Sequence[np.ndarray],
    ground_truth: ClusterGroundTruth,
    topology: Topology,
) -> float:
    """Mean over clients of ||w_k - w_q*||^2 / ||w_q*||^2."""
    norms = [float(np.sum(w_star**2)) for w_star in ground_truth.cluster_models]
    if any(n == 0.0 for n in norms):
        raise ValueError("ground-truth cluster models must have nonzero norm")
    total = 0.0
    for k, w in enumerate(client_models):
        q = int(topology.client_cluster[k])
        diff = w - ground_truth.cluster_models[q]
        total += float(np.sum(diff**2)) / norms[q]
    return total / len(client_models)


def test_accuracy(model: np.ndarray, test_set: Dataset) -> float:
    """Fraction classified correctly; the sigmoid tie at 0.5 goes to class 1."""
    if not set(np.unique(test_set.y)) <= {0.0, 1.0}:
        raise ValueError("test labels must be in {0, 1}")
    predicted = (test_set.X @ model >= 0.0).astype(float)
    return float(np.mean(predicted == test_set.y))


@dataclasses.dataclass
class MonteCarloResult:
    iterations: np.ndarray  # (N,) 1-based
    mean: np.ndarray  # (N,) across replicates, linear domain
    std: np.ndarray  # (N,) population std across replicates
    values: np.ndarray  # (R, N) per-replicate curves
    metric: str
    epsilon: Optional[np.ndarray] = None  # (R, N) when privacy is on


def monte_carlo(config, replicates: int, seeds: Optional[Sequence[int]] = None):
    """Run replicate experiments and aggregate per-iteration mean and std.

    Replicate r defaults to seed master_seed + r. The reduction order over
    replicates is fixed (ascending position in ``seeds``), so reruns agree
    bitwise.
    """
    from .experiments import run_single_replicate  # deferred: avoids cycle

    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    if seeds is None:
        seeds = rng_mod.replicate_seeds(config.master_seed, replicates)
    if len(seeds) != replicates:
        raise ValueError("need exactly one seed per replicate")
    curves = []
    eps_curves = []
    metric = None
    for seed in seeds:
        result = run_single_replicate(config, seed)
        curves.append(result.values)
        metric = result.metric
        if result.epsilon is not None:
            eps_curves.append(result.epsilon)
    values = np.stack(curves)
    return MonteCarloResult(
        iterations=np.arange(1, values.shape[1] + 1),
        mean=values.mean(axis=0),
        std=values.std(axis=0),
        values=values,
        metric=metric,
        epsilon=np.stack(eps_curves) if eps_curves else None,
    )
