"""Keyed random streams so that results do not depend on execution order."""
from __future__ import annotations

import hashlib

import numpy as np


def _words(key) -> list[int]:
    if isinstance(key, (int, np.integer)):
        k = int(key)
        if k < 0:
            raise ValueError("integer keys must be nonnegative")
        return [k & 0xFFFFFFFF, k >> 32] if k >> 32 else [k]
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return [int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:], "little")]


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    entropy = [int(seed) & 0xFFFFFFFF, int(seed) >> 32 & 0xFFFFFFFF]
    for key in keys:
        entropy.extend(_words(key))
    return np.random.SeedSequence(entropy)


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator determined only by ``seed`` and the key tuple."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))
