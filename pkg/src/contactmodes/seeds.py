"""Named derivation of random streams from one top-level seed.

Every stochastic component draws from a stream derived as
``derive_rng(seed, "component", index, ...)``.  Streams for distinct tag
tuples are statistically independent, and the derivation is stable across
runs, platforms and process boundaries (tags are hashed with SHA-256, not
``hash()``).
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_words(tag: str | int) -> list[int]:
    if isinstance(tag, (int, np.integer)):
        return [int(tag) & 0xFFFFFFFF, (int(tag) >> 32) & 0xFFFFFFFF]
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_seed_sequence(seed: int, *tags: str | int) -> np.random.SeedSequence:
    """SeedSequence for the stream named by ``tags`` under ``seed``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for tag in tags:
        entropy.extend(_tag_words(tag))
    return np.random.SeedSequence(entropy)


def derive_rng(seed: int, *tags: str | int) -> np.random.Generator:
    """Independent generator for the stream named by ``tags`` under ``seed``."""
    return np.random.default_rng(derive_seed_sequence(seed, *tags))
