"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by a seed plus a tuple of integers
(sample index, round, step, ...).  Streams for different keys are
statistically independent, and a given key always reproduces the same
numbers regardless of how many other streams were created before it, so
parallel and sequential runs agree.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode())


def stream(seed: int, *key) -> np.random.Generator:
    """Independent generator for ``seed`` and a key path such as ("sample", 17)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_part(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
