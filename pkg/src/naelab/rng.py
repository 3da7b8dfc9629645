"""Seeded random streams.

Every random draw in the package comes from a numpy ``Generator`` backed by
``PCG64`` and seeded through ``SeedSequence``. Child streams are addressed by
a spawn key, so the stream used for instance ``i`` of an ensemble is the same
whether instances are produced serially or by a worker pool.

Stream layout::

    child(seed, i)                 -> SeedSequence(seed, spawn_key=(i,))
    named(seed, "eval", i, j, ...) -> SeedSequence(seed, spawn_key=(STREAMS["eval"], i, j, ...))

Named streams keep the top-level consumers (generation, training, evaluation,
local search) independent of each other for a single top-level seed.
"""

from __future__ import annotations

import numpy as np

STREAMS = {
    "gen": 1,
    "train": 2,
    "eval": 3,
    "sls": 4,
    "tune": 5,
}


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the child stream ``key`` of ``seed`` (empty key = root)."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_rng(seed: int, index: int) -> np.random.Generator:
    return make_rng(seed, index)


def named_rng(seed: int, stream: str, *key: int) -> np.random.Generator:
    try:
        sid = STREAMS[stream]
    except KeyError:
        raise ValueError(f"unknown stream {stream!r}; expected one of {sorted(STREAMS)}") from None
    return make_rng(seed, sid, *key)


def derive_seed(seed: int, stream: str, *key: int) -> int:
    """A 64-bit integer seed drawn from a named stream, for handing to another component."""
    return int(named_rng(seed, stream, *key).integers(0, 2**63))
