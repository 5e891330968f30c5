"""Counter-based random substreams.

Every random draw in the package comes from a generator keyed by a master
seed plus a tuple of integer counters (trial index, block index, ...).  The
stream for a given key never depends on how many other streams were used
before it, so serial and parallel runs see identical randomness.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the substream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def prf_index(seed: int, tag: bytes, data: bytes, modulus: int) -> int:
    """Keyed pseudorandom map of ``data`` into ``range(modulus)``.

    Used for the hash binning of shared sequences; the map is evaluated lazily
    so the full table over all sequences is never built.
    """
    if modulus <= 1:
        return 0
    key = (int(seed) & MASK64).to_bytes(8, "little")
    digest = hashlib.blake2b(data, key=key, person=tag[:16].ljust(16, b"\0"), digest_size=16).digest()
    return int.from_bytes(digest, "little") % modulus
