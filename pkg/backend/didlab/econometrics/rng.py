"""Counter-based random streams.

A replication's stream depends only on (master seed, replication index, cell
path), so serial and parallel runs draw identical numbers.
"""
from typing import Dict, Iterable, Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def replication_seed(master_seed: int, index: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index), *map(int, path)))


def as_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    # spawn() advances a SeedSequence, so callers always get a fresh copy
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(int(seed))


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(as_seed_sequence(seed))


def component_streams(seed: SeedLike, names: Sequence[str]) -> Dict[str, np.random.Generator]:
    """One independent generator per named model component.

    Changing how many numbers one component draws (or scaling them) leaves
    every other component's draws untouched.
    """
    children = as_seed_sequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def chunk_indices(n: int, n_chunks: int) -> Iterable[range]:
    """Contiguous index ranges covering 0..n-1."""
    n_chunks = max(1, min(n_chunks, n))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    return [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
