"""
Named, independent random streams.

Every consumer of randomness asks for its own stream by purpose (and optional keys such as a
detector index), so adding draws in one place never shifts the draws of another.
"""
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    INIT = 1
    PREDICT = 2
    RESAMPLE = 3
    LOOPS = 4
    PROBES = 5


def rng_stream(seed: int, purpose: Stream, *keys: int) -> np.random.Generator:
    """Generator for (seed, purpose, keys); identical arguments give identical streams."""
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(purpose),) + tuple(int(k) for k in keys))
    return np.random.default_rng(seq)
