"""Seeded random streams.

Every random draw in the package goes through :func:`generator`, which wraps
numpy's Philox4x64 counter-based bit generator keyed by a 64-bit seed.
Independent substreams (one per worker or per task) are obtained with
``Philox.jumped(stream)``, i.e. the counter is advanced by
``stream * 2**128`` draws, so substreams never overlap in practice.
"""

import numpy as np

SEED_MAX = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def generator(seed, stream: int = 0) -> np.random.Generator:
    bitgen = np.random.Philox(key=check_seed(seed))
    if stream:
        bitgen = bitgen.jumped(stream)
    return np.random.Generator(bitgen)
