"""FedAvg adapted to the server-graph architecture.

One global model per server, no per-cluster personalization: scheduled
clients take E full-batch gradient steps from their server's model, the
server averages them, and neighboring servers average their aggregates.
Serves as the comparison baseline against the clustered scheme.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from . import privacy as priv
from . import rng as rng_mod
from .core import ClientState, schedule_clients
from .datagen import Dataset
from .errors import ConfigurationError
from .topology import Topology

__all__ = [
    "FedAvgWorld",
    "fedavg_client_update",
    "fedavg_server_round",
    "init_fedavg_world",
    "loss_gradient",
    "run_fedavg_round",
]


def loss_gradient(
    dataset: Dataset, w: np.ndarray, loss_kind: str, lambda_over_Cs: float
) -> np.ndarray:
    """Full-batch gradient of the client's regularized empirical loss."""
    X, y = dataset.X, dataset.y
    D = dataset.num_samples
    if loss_kind == "ridge":
        data_grad = (2.0 / D) * (X.T @ (X @ w - y))
    elif loss_kind == "logistic":
        data_grad = X.T @ (expit(X @ w) - y) / D
    else:
        raise ConfigurationError(f"unknown loss kind: {loss_kind!r}")
    return data_grad + 2.0 * lambda_over_Cs * w


def fedavg_client_update(
    dataset: Dataset,
    anchor: np.ndarray,
    local_steps: int,
    lr: float,
    *,
    loss_kind: str = "ridge",
    lambda_over_Cs: float = 0.0,
    privacy_on: bool = False,
    privacy_state: Optional[priv.PrivacyState] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple:
    """E gradient steps from the server model, optionally perturbed.

    Returns (transmitted model, updated privacy state).
    """
    if local_steps < 1:
        raise ConfigurationError("local_steps must be at least 1")
    if lr < 0:
        raise ConfigurationError("learning rate must be nonnegative")
    w = anchor.astype(float).copy()
    for _ in range(local_steps):
        w -= lr * loss_gradient(dataset, w, loss_kind, lambda_over_Cs)
    if not privacy_on:
        return w, privacy_state
    state = priv.advance(privacy_state)
    xi = priv.sample_noise(state.delta_sq, w.shape[0], rng)
    state = priv.record_transmission(state)
    return w + xi, state


def fedavg_server_round(
    participant_models: Sequence[np.ndarray],
    neighbor_models: Sequence[np.ndarray],
) -> np.ndarray:
    """Two-stage mean: participants collapse to one entry, then join neighbors."""
    entries = [np.asarray(m) for m in neighbor_models]
    if participant_models:
        entries.append(np.mean(np.stack(participant_models), axis=0))
    if not entries:
        raise ValueError("need at least one participant or neighbor model")
    return np.mean(np.stack(entries), axis=0)


@dataclasses.dataclass
class FedAvgWorld:
    topology: Topology
    clients: list
    server_models: np.ndarray  # (S, d)
    lr: float
    local_steps: int
    lambda_over_Cs: float
    loss_kind: str
    privacy_on: bool
    quota: Optional[int]
    sched_rng: Optional[np.random.Generator]
    advance_every_round: bool = False

    @property
    def d(self) -> int:
        return self.server_models.shape[1]


def init_fedavg_world(
    topology: Topology,
    datasets: Sequence[Dataset],
    *,
    seed: int,
    lr: float = 0.05,
    local_steps: int = 1,
    lambda_over_Cs: float = 0.01,
    loss_kind: str = "ridge",
    privacy_on: bool = False,
    clip_bound: float = 1.0,
    phi0: Optional[float] = None,
    delta_sq0: Optional[float] = None,
    zeta: float = 0.98,
    quota: Optional[int] = None,
    sensitivity_rho: float = 1.0,
    advance_every_round: bool = False,
) -> FedAvgWorld:
    """Zero-initialized baseline state with the same stream layout as the core.

    FedAvg has no proximal weight, so the borrowed sensitivity formula uses
    ``sensitivity_rho`` as a stand-in scale; the shipped experiments keep the
    baseline noiseless.
    """
    if len(datasets) != topology.num_clients:
        raise ConfigurationError("one dataset per client required")
    if loss_kind not in ("ridge", "logistic"):
        raise ConfigurationError(f"unknown loss kind: {loss_kind!r}")
    d = datasets[0].dim
    clients = []
    for k in range(topology.num_clients):
        ds = datasets[k]
        if ds.dim != d:
            raise ConfigurationError("all client datasets must share one dimension")
        state = None
        noise = None
        if privacy_on:
            if (phi0 is None) == (delta_sq0 is None):
                raise ConfigurationError(
                    "privacy needs exactly one of phi0 or delta_sq0"
                )
            sens = priv.sensitivity(clip_bound, sensitivity_rho, ds.num_samples)
            if phi0 is not None:
                state = priv.PrivacyState.from_phi(phi0, zeta, sens)
            else:
                state = priv.PrivacyState.from_delta_sq(delta_sq0, zeta, sens)
            noise = rng_mod.stream(seed, rng_mod.PRIVACY_NOISE, entity=k)
        clients.append(
            ClientState(
                id=k,
                server=int(topology.client_server[k]),
                cluster=int(topology.client_cluster[k]),
                data=ds,
                w=np.zeros(d),
                dual=np.zeros(d),  # unused; kept for a uniform client record
                clip_bound=clip_bound,
                privacy=state,
                noise_rng=noise,
            )
        )
    sched = rng_mod.stream(seed, rng_mod.SCHEDULING) if quota is not None else None
    return FedAvgWorld(
        topology=topology,
        clients=clients,
        server_models=np.zeros((topology.num_servers, d)),
        lr=lr,
        local_steps=local_steps,
        lambda_over_Cs=lambda_over_Cs,
        loss_kind=loss_kind,
        privacy_on=privacy_on,
        quota=quota,
        sched_rng=sched,
        advance_every_round=advance_every_round,
    )


def run_fedavg_round(world: FedAvgWorld, n: int) -> dict:
    """Execute one baseline round in place."""
    topo = world.topology
    if world.quota is None:
        participants = set(range(topo.num_clients))
    else:
        participants = schedule_clients(topo, world.quota, world.sched_rng)

    if world.privacy_on and world.advance_every_round:
        for c in world.clients:
            if c.id not in participants:
                c.privacy = priv.advance(c.privacy)

    stage_one = np.empty_like(world.server_models)
    for s in range(topo.num_servers):
        sent = []
        for k in topo.clients_of(s):
            if k not in participants:
                continue
            c = world.clients[k]
            model, c.privacy = fedavg_client_update(
                c.data,
                world.server_models[s],
                world.local_steps,
                world.lr,
                loss_kind=world.loss_kind,
                lambda_over_Cs=world.lambda_over_Cs,
                privacy_on=world.privacy_on,
                privacy_state=c.privacy,
                rng=c.noise_rng,
            )
            c.w = model
            c.transmitted = model
            sent.append(model)
        if sent:
            stage_one[s] = fedavg_server_round(sent, [])
        else:
            stage_one[s] = world.server_models[s]  # hold

    adjacency = topo.adjacency()
    world.server_models = np.stack(
        [
            fedavg_server_round([], [stage_one[p] for p in adjacency[s]])
            for s in range(topo.num_servers)
        ]
    )
    return {"iteration": n, "participants": participants}
