"""Server graph, client placement, and cluster assignment.

One federation is described by an undirected connected graph over servers,
a fixed number of clients attached to each server, and a cluster label per
client. Neighborhoods follow the convention that a server is a neighbor of
itself, so aggregation over a neighborhood always includes the local model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pgfl.errors import ConfigurationError

__all__ = [
    "Topology",
    "gen_random_connected_graph",
    "neighbors",
    "assign_clients",
    "build_topology",
]


@dataclass
class Topology:
    """Static structure of one simulated federation.

    Attributes:
        num_servers: number of servers S.
        edges: sorted tuple of (low, high) server-id pairs, no self loops.
        client_server: array, client id -> server id.
        client_cluster: array, client id -> cluster id.
        num_clusters: number of clusters Q.
    """

    num_servers: int
    edges: tuple[tuple[int, int], ...]
    client_server: np.ndarray
    client_cluster: np.ndarray
    num_clusters: int
    _adjacency: list[list[int]] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def num_clients(self) -> int:
        return len(self.client_server)

    def adjacency(self) -> list[list[int]]:
        """Neighbor lists including self, ascending ids, cached."""
        if self._adjacency is None:
            adj: list[set[int]] = [{s} for s in range(self.num_servers)]
            for a, b in self.edges:
                adj[a].add(b)
                adj[b].add(a)
            self._adjacency = [sorted(n) for n in adj]
        return self._adjacency

    def clients_of(self, server: int) -> np.ndarray:
        """Ids of the clients attached to one server, ascending."""
        return np.flatnonzero(self.client_server == server)


def _prufer_tree(num_servers: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random labeled spanning tree (Prüfer decoding)."""
    n = num_servers
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=int)
    for v in seq:
        degree[v] += 1
    edges = []
    # Smallest-leaf-first decoding; heap not needed at these sizes.
    leaves = sorted(v for v in range(n) if degree[v] == 1)
    for v in seq:
        leaf = leaves.pop(0)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[v] -= 1
        if degree[v] == 1:
            # Insert keeping the list sorted.
            lo = 0
            while lo < len(leaves) and leaves[lo] < v:
                lo += 1
            leaves.insert(lo, int(v))
    a, b = leaves
    edges.append((min(a, b), max(a, b)))
    return edges


def gen_random_connected_graph(
    num_servers: int, avg_degree: float, rng: np.random.Generator
) -> tuple[tuple[int, int], ...]:
    """Random connected graph with a target mean degree.

    A uniform random spanning tree guarantees connectivity; uniformly random
    additional edges are drawn until ceil(num_servers * avg_degree / 2)
    edges exist.

    Raises:
        ConfigurationError: if the requested degree is out of range or too
            small to allow a connected graph.
    """
    if num_servers < 1:
        raise ConfigurationError(f"num_servers must be >= 1, got {num_servers}")
    if not 0 <= avg_degree < num_servers:
        raise ConfigurationError(
            f"avg_degree must satisfy 0 <= avg_degree < num_servers "
            f"({num_servers}), got {avg_degree}"
        )
    target = math.ceil(num_servers * avg_degree / 2)
    if num_servers == 1:
        if target > 0:
            raise ConfigurationError("a single server admits no edges")
        return ()
    if target < num_servers - 1:
        raise ConfigurationError(
            f"avg_degree {avg_degree} yields {target} edges; a connected graph "
            f"on {num_servers} servers needs at least {num_servers - 1}"
        )
    edges = set(_prufer_tree(num_servers, rng))
    while len(edges) < target:
        a, b = rng.integers(0, num_servers, size=2)
        if a == b:
            continue
        edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return tuple(sorted(edges))


def neighbors(topology: Topology, server: int) -> set[int]:
    """Neighborhood of a server, including the server itself."""
    if not 0 <= server < topology.num_servers:
        raise ValueError(
            f"server id {server} out of range [0, {topology.num_servers})"
        )
    return set(topology.adjacency()[server])


def assign_clients(
    num_servers: int,
    clients_per_server: int,
    num_clusters: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Attach clients to servers and draw cluster labels.

    Client ids are dense: server s owns ids [s*M, (s+1)*M). Cluster labels
    are uniform; the whole labeling is resampled if any cluster ends up
    globally empty, so every cluster is observable somewhere in the graph.
    """
    if num_servers < 1 or clients_per_server < 1 or num_clusters < 1:
        raise ConfigurationError(
            "num_servers, clients_per_server and num_clusters must be >= 1"
        )
    total = num_servers * clients_per_server
    if num_clusters > total:
        raise ConfigurationError(
            f"{num_clusters} clusters cannot all be non-empty with "
            f"{total} clients"
        )
    client_server = np.repeat(np.arange(num_servers), clients_per_server)
    while True:
        client_cluster = rng.integers(0, num_clusters, size=total)
        if len(np.unique(client_cluster)) == num_clusters:
            break
    return client_server, client_cluster


def build_topology(
    num_servers: int,
    clients_per_server: int,
    num_clusters: int,
    avg_degree: float,
    rng: np.random.Generator,
) -> Topology:
    """Generate graph and client assignment from one stream."""
    edges = gen_random_connected_graph(num_servers, avg_degree, rng)
    client_server, client_cluster = assign_clients(
        num_servers, clients_per_server, num_clusters, rng
    )
    return Topology(
        num_servers=num_servers,
        edges=edges,
        client_server=client_server,
        client_cluster=client_cluster,
        num_clusters=num_clusters,
    )
