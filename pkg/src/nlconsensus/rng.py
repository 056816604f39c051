"""Seeded counter-based random streams.

Every stream is keyed by ``(master seed, stream id, substream)`` so trials draw
identical numbers no matter how many run, or in which order.
"""

import numpy as np

DEFAULT_SEED = 7

# substream ids
INIT = 0
EDGE_NOISE = 1
VECTOR_NOISE = 2
GRAPH = 3


def stream(seed: int, substream: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(int(index), int(substream)))
    return np.random.Generator(np.random.Philox(ss))
