"""Replica seeding.

Replica ``r`` of an experiment with master seed ``m`` draws from
``SeedSequence(m, spawn_key=(r,))``, which is exactly the ``r``-th child of
``SeedSequence(m).spawn(...)``.  Any single replica can therefore be re-run in
isolation from ``(m, r)``.  Sub-streams inside one replica (for instance the
coupling's private choices) extend the spawn key: ``(r, k)``.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def replica_seedseq(master: int, replica: int, *sub: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(check_seed(master), spawn_key=(int(replica), *map(int, sub)))


def replica_rng(master: int, replica: int, *sub: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replica_seedseq(master, replica, *sub)))
