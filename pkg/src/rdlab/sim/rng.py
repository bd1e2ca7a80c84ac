"""Named counter-based random streams."""

from __future__ import annotations

import zlib

import numpy as np


def role_key(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


def stream(master: int, index: int, role: str) -> np.random.Generator:
    """Philox generator keyed by (master seed, index, role).

    Streams with different roles or indices are independent, so codebooks,
    sources, permutations and T-draws never share random numbers.
    """
    if master < 0 or index < 0:
        raise ValueError("seeds and indices must be non-negative")
    seq = np.random.SeedSequence([int(master), int(index), role_key(role)])
    return np.random.Generator(np.random.Philox(seq))
