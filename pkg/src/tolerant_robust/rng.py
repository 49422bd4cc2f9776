"""Seeded random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Independent substreams are derived from a master seed plus a tuple of
integer keys through ``numpy.random.SeedSequence``: the keys become the
``spawn_key``, which SeedSequence hashes together with the 128-bit entropy
pool. String keys are first folded to 64-bit integers with BLAKE2b so that
scenario names can be used as keys.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def key64(value) -> int:
    """Fold an int, str, bytes or float into a stable unsigned 64-bit key."""
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value) & _MASK64
    if isinstance(value, str):
        data = value.encode("utf-8")
    elif isinstance(value, (bytes, bytearray)):
        data = bytes(value)
    elif isinstance(value, (float, np.floating)):
        data = np.float64(value).tobytes()
    else:
        data = np.ascontiguousarray(value, dtype=np.float64).tobytes()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def substream(seed: int, *keys) -> np.random.Generator:
    """Return a generator for the substream ``(seed, *keys)``.

    Identical arguments always give bit-identical streams; any change in a key
    gives a statistically independent stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                spawn_key=tuple(key64(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def child(rng: np.random.Generator, *keys) -> np.random.Generator:
    """Derive a substream from an existing generator without advancing it twice.

    One 64-bit word is consumed from ``rng`` and used as the seed of the child.
    """
    seed = int(rng.integers(0, 1 << 63, dtype=np.int64))
    return substream(seed, *keys)
