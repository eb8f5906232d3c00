"""Named, reproducible random streams derived from one integer seed."""
import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for pipeline stage ``name``.

    The same ``(seed, name)`` always yields the same sequence, regardless of
    how many other stages drew numbers before.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(zlib.crc32(name.encode()),))
    return np.random.default_rng(ss)
