"""Seed derivation.

Every random draw in the package comes from a generator built by
:func:`derive_seed` so that a run is reproducible from its root seed alone.
Stage names are hashed with CRC32 (stable across processes, unlike ``hash``).
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(root: int, stage: str | int = 0, index: int = 0) -> int:
    """Deterministic 64-bit child seed for ``(root, stage, index)``."""
    key = zlib.crc32(stage.encode("utf-8")) if isinstance(stage, str) else int(stage)
    ss = np.random.SeedSequence([int(root) & MASK64, key & MASK64, int(index) & MASK64])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(root: int, stage: str | int = 0, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, stage, index))
