"""Deterministic random-stream derivation.

Every randomized code path derives its generator from a root seed, a short
purpose tag, and optional integer indices. Streams for different
(tag, index) keys are statistically independent, so per-instance or
per-trial work can run in any order (or in parallel) without changing
results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_ints(seed: int, tag: str, indices: tuple[int, ...]) -> list[int]:
    return [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode("utf-8")), *map(int, indices)]


def stream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Generator for the (seed, tag, *indices) stream."""
    return np.random.default_rng(np.random.SeedSequence(_key_ints(seed, tag, indices)))


def stream_int(seed: int, tag: str, *indices: int) -> int:
    """A stable 63-bit integer derived from the stream key, usable as a sub-seed."""
    ss = np.random.SeedSequence(_key_ints(seed, tag, indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
