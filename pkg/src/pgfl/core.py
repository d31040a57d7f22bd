"""One federation round: primal step, aggregation, mixing, dual update.

Servers keep one model per cluster. Each round, scheduled clients solve a
proximal subproblem anchored at their server's cluster model, optionally
perturb the result for privacy, and ship it with their pre-update dual.
Servers average participants, exchange with graph neighbors, blend across
clusters with a (possibly decaying) coefficient tau, and broadcast. Clients
then take a dual ascent step against what they received.

All means sum in ascending id order so reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np

from . import privacy as priv
from . import rng as rng_mod
from .datagen import Dataset
from .errors import ConfigurationError
from .solvers import CachedRidgeProx, ProxProblem, logistic_primal_solve
from .topology import Topology

__all__ = [
    "ClientState",
    "ServerState",
    "TauSchedule",
    "World",
    "client_dual_update",
    "client_step",
    "init_world",
    "inter_cluster_mix",
    "inter_server_aggregate",
    "run_round",
    "schedule_clients",
    "server_aggregate",
]


@dataclasses.dataclass
class TauSchedule:
    """Inter-cluster mixing coefficient per iteration.

    ``constant`` holds tau0; ``exponential`` uses tau0 * decay^n with the
    round counter n starting at 1, so the first round already decays once.
    """

    kind: str = "constant"
    tau0: float = 0.0
    decay: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "exponential"):
            raise ConfigurationError(f"unknown tau schedule kind: {self.kind!r}")
        if not 0.0 <= self.tau0 < 1.0:
            raise ConfigurationError("tau0 must lie in [0, 1)")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigurationError("decay must lie in (0, 1]")

    def value(self, n: int) -> float:
        if self.kind == "constant":
            return self.tau0
        return self.tau0 * self.decay**n


@dataclasses.dataclass
class ClientState:
    id: int
    server: int
    cluster: int
    data: Dataset
    w: np.ndarray
    dual: np.ndarray
    clip_bound: float
    privacy: Optional[priv.PrivacyState] = None
    transmitted: Optional[np.ndarray] = None
    prox: Optional[CachedRidgeProx] = None
    noise_rng: Optional[np.random.Generator] = None


@dataclasses.dataclass
class ServerState:
    id: int
    # (Q, d) arrays: rows are clusters.
    mixed: np.ndarray  # w_{q,s}, what clients receive
    aggregated: np.ndarray  # participant average, before exchange
    hat: np.ndarray  # neighborhood average


@dataclasses.dataclass
class World:
    topology: Topology
    clients: list
    servers: list
    rho: float
    lambda_over_Cs: float
    loss_kind: str
    tau: TauSchedule
    privacy_on: bool
    quota: Optional[int]  # None = full participation
    solver_tol: float
    solver_max_iters: int
    clip_in_solver: bool
    sched_rng: Optional[np.random.Generator]
    advance_every_round: bool = False
    disable_inter_server: bool = False

    @property
    def d(self) -> int:
        return self.clients[0].w.shape[0]

    @property
    def num_clusters(self) -> int:
        return self.topology.num_clusters


def init_world(
    topology: Topology,
    datasets: Sequence[Dataset],
    *,
    seed: int,
    rho: float = 1.0,
    lambda_over_Cs: float = 0.01,
    loss_kind: str = "ridge",
    tau: Optional[TauSchedule] = None,
    privacy_on: bool = False,
    clip_bound: float = 1.0,
    phi0: Optional[float] = None,
    delta_sq0: Optional[float] = None,
    zeta: float = 0.98,
    quota: Optional[int] = None,
    solver_tol: float = 1e-8,
    solver_max_iters: int = 500,
    clip_in_solver: Optional[bool] = None,
    advance_every_round: bool = False,
    disable_inter_server: bool = False,
) -> World:
    """Assemble client/server states with zero models and split random streams."""
    if loss_kind not in ("ridge", "logistic"):
        raise ConfigurationError(f"unknown loss kind: {loss_kind!r}")
    if len(datasets) != topology.num_clients:
        raise ConfigurationError("one dataset per client required")
    if rho <= 0:
        raise ConfigurationError("rho must be positive")
    if clip_in_solver is None:
        clip_in_solver = loss_kind == "logistic"
    if loss_kind == "ridge" and clip_in_solver:
        # The ridge step is the exact closed form; clipping enters only the
        # sensitivity audit. Refusing beats silently not clipping.
        raise ConfigurationError("ridge solves exactly; clip_in_solver only applies to logistic")
    d = datasets[0].dim
    tau = tau if tau is not None else TauSchedule()
    if topology.num_clusters == 1 and tau.tau0 > 0:
        raise ConfigurationError("inter-cluster mixing needs at least 2 clusters")

    clients = []
    for k in range(topology.num_clients):
        ds = datasets[k]
        if ds.dim != d:
            raise ConfigurationError("all client datasets must share one dimension")
        state = None
        noise = None
        if privacy_on:
            sens = priv.sensitivity(clip_bound, rho, ds.num_samples)
            if (phi0 is None) == (delta_sq0 is None):
                raise ConfigurationError(
                    "privacy needs exactly one of phi0 or delta_sq0"
                )
            if phi0 is not None:
                state = priv.PrivacyState.from_phi(phi0, zeta, sens)
            else:
                state = priv.PrivacyState.from_delta_sq(delta_sq0, zeta, sens)
            noise = rng_mod.stream(seed, rng_mod.PRIVACY_NOISE, entity=k)
        prox = None
        if loss_kind == "ridge":
            prox = CachedRidgeProx(ds, rho, lambda_over_Cs)
        clients.append(
            ClientState(
                id=k,
                server=int(topology.client_server[k]),
                cluster=int(topology.client_cluster[k]),
                data=ds,
                w=np.zeros(d),
                dual=np.zeros(d),
                clip_bound=clip_bound,
                privacy=state,
                prox=prox,
                noise_rng=noise,
            )
        )
    servers = [
        ServerState(
            id=s,
            mixed=np.zeros((topology.num_clusters, d)),
            aggregated=np.zeros((topology.num_clusters, d)),
            hat=np.zeros((topology.num_clusters, d)),
        )
        for s in range(topology.num_servers)
    ]
    sched = rng_mod.stream(seed, rng_mod.SCHEDULING) if quota is not None else None
    return World(
        topology=topology,
        clients=clients,
        servers=servers,
        rho=rho,
        lambda_over_Cs=lambda_over_Cs,
        loss_kind=loss_kind,
        tau=tau,
        privacy_on=privacy_on,
        quota=quota,
        solver_tol=solver_tol,
        solver_max_iters=solver_max_iters,
        clip_in_solver=clip_in_solver,
        sched_rng=sched,
        advance_every_round=advance_every_round,
        disable_inter_server=disable_inter_server,
    )


def schedule_clients(
    topology: Topology, per_server_quota: int, rng: np.random.Generator
) -> set:
    """Uniform without-replacement sample of ``quota`` clients at each server."""
    if per_server_quota < 0:
        raise ConfigurationError("quota must be nonnegative")
    chosen = set()
    for s in range(topology.num_servers):
        members = topology.clients_of(s)
        if per_server_quota > len(members):
            raise ConfigurationError(
                f"quota {per_server_quota} exceeds the {len(members)} clients "
                f"of server {s}"
            )
        if per_server_quota == 0:
            continue
        picked = rng.choice(members, size=per_server_quota, replace=False)
        chosen.update(int(c) for c in picked)
    return chosen


def client_step(
    client: ClientState,
    anchor: np.ndarray,
    world: World,
) -> tuple:
    """Primal solve anchored at the broadcast model, plus optional perturbation.

    Returns (transmitted model, pre-update dual). Mutates the client's model,
    privacy schedule, and ``transmitted`` record.
    """
    dual_prev = client.dual.copy()
    if client.prox is not None:
        w = client.prox.solve(dual_prev, anchor)
    else:
        problem = ProxProblem(
            dataset=client.data,
            dual=dual_prev,
            anchor=anchor,
            rho=world.rho,
            lambda_over_Cs=world.lambda_over_Cs,
            clip_bound=client.clip_bound,
        )
        w = logistic_primal_solve(
            problem,
            tol=world.solver_tol,
            max_iters=world.solver_max_iters,
            clip_in_solver=world.clip_in_solver,
        )
    client.w = w
    if world.privacy_on:
        client.privacy = priv.advance(client.privacy)
        xi = priv.sample_noise(client.privacy.delta_sq, w.shape[0], client.noise_rng)
        client.privacy = priv.record_transmission(client.privacy)
        transmitted = w + xi
    else:
        transmitted = w
    client.transmitted = transmitted
    return transmitted, dual_prev


def server_aggregate(participants: Sequence[tuple], rho: float) -> np.ndarray:
    """Average participant models minus 1/rho times their average dual."""
    if not participants:
        raise ValueError("no participants: caller must hold the previous model")
    models = np.stack([m for m, _ in participants])
    duals = np.stack([phi for _, phi in participants])
    return models.mean(axis=0) - duals.mean(axis=0) / rho


def inter_server_aggregate(own_and_neighbor_models: Sequence[np.ndarray]) -> np.ndarray:
    """Unweighted mean over the closed neighborhood."""
    if not own_and_neighbor_models:
        raise ValueError("neighborhood may not be empty (it contains the server)")
    return np.mean(np.stack(own_and_neighbor_models), axis=0)


def inter_cluster_mix(
    all_cluster_aggregates: np.ndarray, q: int, tau_n: float
) -> np.ndarray:
    """Blend cluster q's model with the average of the other clusters'."""
    if not 0.0 <= tau_n < 1.0:
        raise ConfigurationError("tau must lie in [0, 1)")
    hats = np.asarray(all_cluster_aggregates)
    Q = hats.shape[0]
    if tau_n == 0.0:
        return hats[q].copy()
    if Q == 1:
        raise ConfigurationError("inter-cluster mixing needs at least 2 clusters")
    others = (hats.sum(axis=0) - hats[q]) / (Q - 1)
    return (1.0 - tau_n) * hats[q] + tau_n * others


def client_dual_update(
    client: ClientState,
    received_model: np.ndarray,
    rho: float,
    privacy_on: bool,
) -> None:
    """Dual ascent against the broadcast; the local estimate is what was sent."""
    local = client.transmitted if privacy_on else client.w
    client.dual = client.dual + rho * (received_model - local)


def run_round(world: World, n: int) -> dict:
    """Execute iteration ``n`` (1-based) of the federation in place."""
    tau_n = world.tau.value(n)
    topo = world.topology
    if world.quota is None:
        participants = set(range(topo.num_clients))
    else:
        participants = schedule_clients(topo, world.quota, world.sched_rng)

    if world.privacy_on and world.advance_every_round:
        for c in world.clients:
            if c.id not in participants:
                c.privacy = priv.advance(c.privacy)

    # Client solves + per-cluster participant averages.
    for s in range(topo.num_servers):
        server = world.servers[s]
        members = topo.clients_of(s)
        for q in range(topo.num_clusters):
            shipped = []
            for k in members:
                c = world.clients[k]
                if c.cluster != q or k not in participants:
                    continue
                shipped.append(client_step(c, server.mixed[q], world))
            if shipped:
                server.aggregated[q] = server_aggregate(shipped, world.rho)
            # else: hold the previous aggregate for this round's exchange

    # Graph exchange.
    for s in range(topo.num_servers):
        server = world.servers[s]
        if world.disable_inter_server:
            server.hat = server.aggregated.copy()
            continue
        hood = topo.adjacency()[s]  # sorted, includes s
        for q in range(topo.num_clusters):
            server.hat[q] = inter_server_aggregate(
                [world.servers[p].aggregated[q] for p in hood]
            )

    # Cluster blending + broadcast target.
    for s in range(topo.num_servers):
        server = world.servers[s]
        mixed = np.empty_like(server.mixed)
        for q in range(topo.num_clusters):
            mixed[q] = inter_cluster_mix(server.hat, q, tau_n)
        server.mixed = mixed

    # Dual updates for participants only; everyone else freezes.
    for k in sorted(participants):
        c = world.clients[k]
        client_dual_update(
            c, world.servers[c.server].mixed[c.cluster], world.rho, world.privacy_on
        )

    return {"iteration": n, "tau": tau_n, "participants": participants}
