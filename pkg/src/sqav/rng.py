"""Seeded random streams.

Every stochastic routine takes a :class:`numpy.random.Generator`. Generators
are built from numpy's ``SeedSequence`` + ``PCG64``, whose output is specified
bit-for-bit and therefore identical across platforms. Independent streams are
derived by spawn key, so a protocol run gives each voter, the quantum "nature"
and the eavesdropper their own stream and results do not depend on call order
between parties.
"""
from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1

# spawn-key namespaces
NATURE = 0
VOTER = 1
EVE = 2
TRIAL = 3
DISTRIBUTOR = 4


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for ``seed`` restricted to the sub-stream named by ``key``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return make_rng(0)
    return make_rng(rng)
