"""Deterministic seed splitting.

Every random draw in the package comes from a generator whose seed is derived
from a root seed and a tuple of task keys, so results do not depend on the
order in which tasks are executed.
"""
import zlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(root, *keys):
    """Return a 63-bit integer seed for the task identified by ``keys``."""
    ss = np.random.SeedSequence(int(root), spawn_key=tuple(_key_to_int(k) for k in keys))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int(((int(hi) << 32) | int(lo)) & 0x7FFFFFFFFFFFFFFF)


def rng_for(root, *keys):
    return np.random.default_rng(derive_seed(root, *keys))
