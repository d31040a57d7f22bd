"""Deterministic random-stream splitting.

One experiment replicate owns a single integer seed. Every consumer of
randomness inside that replicate (topology build, ground-truth draw, each
client's data, the scheduler, each client's privacy noise) gets an
independent stream derived from that seed through a fixed spawn key, so

- reruns with the same seed are bit-identical,
- adding or removing one consumer never shifts the draws of another,
- paired runs that differ only in deterministic settings (e.g. the mixing
  weight) consume identical noise streams.

Replicate r of a run with master seed m uses seed m + r; ``SeedSequence``
hashes its entropy, so consecutive integers give independent streams.
"""

from __future__ import annotations

import numpy as np

# Domain tags for the spawn key. Fixed for the life of the file format:
# changing them invalidates recorded results.
TOPOLOGY = 0
GROUND_TRUTH = 1
DATA = 2
SCHEDULING = 3
PRIVACY_NOISE = 4


def stream(seed: int, domain: int, entity: int | None = None) -> np.random.Generator:
    """Return the PCG64 generator for one (seed, domain, entity) slot.

    Args:
        seed: replicate seed (master seed + replicate index).
        domain: one of the module-level domain tags.
        entity: optional sub-id, e.g. a client id. Omit for per-replicate
            singletons such as the scheduler.
    """
    key = (domain,) if entity is None else (domain, entity)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def replicate_seeds(master_seed: int, replicates: int) -> list[int]:
    """Seeds for each replicate of a run: master_seed + r."""
    return [master_seed + r for r in range(replicates)]
