"""Seeded, splittable random streams.

Every random draw in the package (initialisation, translation offsets,
shot sampling, random basis controls, data shuffles) comes from a stream
keyed by ``(seed, purpose, index)``.  Streams are backed by numpy's Philox
counter-based bit generator, whose output is specified bit-for-bit and is
identical on every platform, so results never depend on evaluation order
or on how work is split across threads.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1


def tag_key(tag: str) -> int:
    """Stable 64-bit integer for a purpose tag (``hash()`` is salted per process)."""
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, purpose, *index)``."""
    if not 0 <= int(seed) <= _U64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    for i in index:
        if int(i) < 0:
            raise ValueError(f"stream indices must be non-negative, got {index}")
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(tag_key(purpose), *(int(i) for i in index))
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, purpose: str, *index: int) -> int:
    """Derive a child 64-bit seed, e.g. to hand to a sub-component."""
    return int(stream(seed, purpose, *index).integers(0, _U64, dtype=np.uint64, endpoint=True))
