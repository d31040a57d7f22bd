"""Experiment orchestration: build worlds from a config, run, persist CSV."""

from __future__ import annotations

import dataclasses
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng as rng_mod
from .config import ExperimentConfig
from .core import World, init_world, run_round
from .datagen import ClusterGroundTruth, gen_client_dataset, gen_cluster_models
from .errors import ConfigurationError
from .fedavg import init_fedavg_world, run_fedavg_round
from .metrics import monte_carlo, nmsd, test_accuracy
from .mnist import build_classification_task, build_test_set, load_digit_data
from .oracles import matched_cluster_optima, max_pairwise_sq_distance
from .topology import Topology, build_topology

__all__ = [
    "ReplicateResult",
    "build_replicate",
    "paired_mixing_gap",
    "run_experiment",
    "run_single_replicate",
]


@dataclasses.dataclass
class ReplicateResult:
    metric: str  # "nmsd" or "accuracy"
    values: np.ndarray  # (N,) one entry per iteration
    epsilon: Optional[np.ndarray] = None  # (N,) when privacy is on


def _build_topology(config: ExperimentConfig, seed: int) -> Topology:
    return build_topology(
        config.num_servers,
        config.clients_per_server,
        config.num_clusters,
        config.avg_degree,
        rng_mod.stream(seed, rng_mod.TOPOLOGY),
    )


def _regression_data(config: ExperimentConfig, topology: Topology, seed: int):
    truth = gen_cluster_models(
        config.d,
        config.num_clusters,
        config.spread,
        rng_mod.stream(seed, rng_mod.GROUND_TRUTH),
    )
    datasets = []
    for k in range(topology.num_clients):
        data_rng = rng_mod.stream(seed, rng_mod.DATA, entity=k)
        D_k = int(data_rng.integers(config.d_k_min, config.d_k_max + 1))
        datasets.append(
            gen_client_dataset(
                truth.cluster_models[int(topology.client_cluster[k])],
                D_k,
                config.noise_std,
                data_rng,
            )
        )
    return datasets, truth


def _classification_data(config: ExperimentConfig, topology: Topology, seed: int):
    train, test = load_digit_data(config.mnist_dir)
    datasets = []
    for k in range(topology.num_clients):
        data_rng = rng_mod.stream(seed, rng_mod.DATA, entity=k)
        D_k = int(data_rng.integers(config.d_k_min, config.d_k_max + 1))
        class_a, class_b = config.mnist_class_sets[int(topology.client_cluster[k])]
        datasets.append(
            build_classification_task(train, class_a, class_b, D_k, data_rng)
        )
    test_sets = []
    for q in range(config.num_clusters):
        class_a, class_b = config.mnist_class_sets[q]
        test_rng = rng_mod.stream(
            seed, rng_mod.DATA, entity=topology.num_clients + q
        )
        test_sets.append(
            build_test_set(test, class_a, class_b, config.test_cap, test_rng)
        )
    return datasets, test_sets


def build_replicate(config: ExperimentConfig, seed: int):
    """World plus evaluation target (ground truth or test sets) for one seed."""
    topology = _build_topology(config, seed)
    if config.task == "ridge":
        datasets, target = _regression_data(config, topology, seed)
    else:
        datasets, target = _classification_data(config, topology, seed)

    if config.algorithm == "pgfl":
        world = init_world(
            topology,
            datasets,
            seed=seed,
            rho=config.rho,
            lambda_over_Cs=config.lambda_over_Cs,
            loss_kind=config.task,
            tau=config.tau_schedule(),
            privacy_on=config.privacy_on,
            clip_bound=config.clip_bound,
            phi0=config.phi0,
            delta_sq0=config.delta_sq0,
            zeta=config.zeta,
            quota=config.schedule_quota,
            solver_tol=config.solver_tol,
            solver_max_iters=config.solver_max_iters,
            clip_in_solver=config.clip_in_solver,
            advance_every_round=config.privacy_advance_every_round,
            disable_inter_server=config.disable_inter_server,
        )
    else:
        world = init_fedavg_world(
            topology,
            datasets,
            seed=seed,
            lr=config.fedavg_lr,
            local_steps=config.fedavg_local_steps,
            lambda_over_Cs=config.lambda_over_Cs,
            loss_kind=config.task,
            privacy_on=config.privacy_on,
            clip_bound=config.clip_bound,
            phi0=config.phi0,
            delta_sq0=config.delta_sq0,
            zeta=config.zeta,
            quota=config.schedule_quota,
            advance_every_round=config.privacy_advance_every_round,
        )
    return world, target


def _evaluate(config: ExperimentConfig, world, target) -> float:
    if config.task == "ridge":
        models = [c.w for c in world.clients]
        return nmsd(models, target, world.topology)
    # Classification: average server-side cluster models against each
    # cluster's held-out pool.
    scores = []
    if isinstance(world, World):
        for server in world.servers:
            for q in range(config.num_clusters):
                scores.append(test_accuracy(server.mixed[q], target[q]))
    else:
        for s in range(world.topology.num_servers):
            for q in range(config.num_clusters):
                scores.append(test_accuracy(world.server_models[s], target[q]))
    return float(np.mean(scores))


def _max_epsilon(config: ExperimentConfig, world) -> float:
    return max(c.privacy.epsilon(config.dp_delta) for c in world.clients)


def run_single_replicate(config: ExperimentConfig, seed: int) -> ReplicateResult:
    world, target = build_replicate(config, seed)
    step = run_round if isinstance(world, World) else run_fedavg_round
    values = np.empty(config.iterations)
    eps = np.empty(config.iterations) if config.privacy_on else None
    for n in range(1, config.iterations + 1):
        step(world, n)
        values[n - 1] = _evaluate(config, world, target)
        if eps is not None:
            eps[n - 1] = _max_epsilon(config, world)
    metric = "nmsd" if config.task == "ridge" else "accuracy"
    return ReplicateResult(metric=metric, values=values, epsilon=eps)


def _fmt(x: float) -> str:
    return repr(float(x))


def run_experiment(
    config: ExperimentConfig,
    out_dir,
    name: str = "experiment",
    quiet: bool = True,
) -> dict:
    """Run all replicates and write the result bundle.

    Writes ``<name>_iterations.csv`` (header iteration,replicate,metric,epsilon),
    ``<name>_aggregate.csv`` (header iteration,mean,std), and
    ``<name>_config.json`` (the exact config echo). Returns the paths plus the
    in-memory aggregate.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    result = monte_carlo(config, config.replicates)

    iter_path = out / f"{name}_iterations.csv"
    rows = ["iteration,replicate,metric,epsilon"]
    for r in range(result.values.shape[0]):
        for i, n in enumerate(result.iterations):
            eps = "" if result.epsilon is None else _fmt(result.epsilon[r, i])
            rows.append(f"{n},{r},{_fmt(result.values[r, i])},{eps}")
    iter_path.write_text("\n".join(rows) + "\n")

    agg_path = out / f"{name}_aggregate.csv"
    rows = ["iteration,mean,std"]
    for i, n in enumerate(result.iterations):
        rows.append(f"{n},{_fmt(result.mean[i])},{_fmt(result.std[i])}")
    agg_path.write_text("\n".join(rows) + "\n")

    config_path = out / f"{name}_config.json"
    config_path.write_text(config.to_json() + "\n")

    if not quiet:
        print(
            f"{name}: {config.replicates} replicates x {config.iterations} "
            f"iterations in {time.time() - started:.1f}s -> {iter_path}"
        )
    return {
        "iterations_csv": iter_path,
        "aggregate_csv": agg_path,
        "config_json": config_path,
        "result": result,
    }


def paired_mixing_gap(config: ExperimentConfig, seed: int, n_max: int):
    """Mixing impact versus its recursion bound, on shared random streams.

    Runs the configured (mixing) world and a tau = 0 twin from the same seed,
    tracking the mean over servers and clusters of the squared distance
    between their broadcast models, alongside the bound
    b_n = (1 - tau_n) b_{n-1} + tau_n * eta with eta the largest squared
    distance between oracle cluster optima.
    """
    if config.task != "ridge":
        raise ConfigurationError("the mixing bound check is a regression setup")
    mixed_world, _ = build_replicate(config, seed)
    plain_world, _ = build_replicate(
        config.replaced(tau_kind="constant", tau0=0.0, tau_decay=1.0), seed
    )
    datasets = [c.data for c in mixed_world.clients]
    oracle = matched_cluster_optima(
        mixed_world.topology, datasets, config.lambda_over_Cs
    )
    eta = max_pairwise_sq_distance(oracle)
    schedule = config.tau_schedule()

    gaps = np.empty(n_max)
    bounds = np.empty(n_max)
    b = 0.0
    for n in range(1, n_max + 1):
        run_round(mixed_world, n)
        run_round(plain_world, n)
        sq = [
            np.sum((ms.mixed[q] - ps.mixed[q]) ** 2)
            for ms, ps in zip(mixed_world.servers, plain_world.servers)
            for q in range(config.num_clusters)
        ]
        gaps[n - 1] = float(np.mean(sq))
        tau_n = schedule.value(n)
        b = (1.0 - tau_n) * b + tau_n * eta
        bounds[n - 1] = b
    return gaps, bounds, eta
