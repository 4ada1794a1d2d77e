"""Seed derivation for independent, order-free random streams."""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_word(tag: object) -> int:
    digest = hashlib.blake2b(str(tag).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, purpose: str, *index: object) -> np.random.Generator:
    """Return a generator whose stream depends only on ``(seed, purpose, index)``.

    Streams never depend on the order in which they are requested, so
    parallel evaluation cannot change results.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, _tag_word(purpose)]
    words.extend(_tag_word(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(words))
