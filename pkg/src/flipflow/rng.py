"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, trajectory index)``;
draw ``i`` of a stream is the i-th counter block, so results never depend
on which worker ran which trajectory or in what order.
"""

import numpy as np


def make_rng(seed, stream=0):
    """Return the generator for trajectory ``stream`` of run ``seed``."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng):
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(int(rng))
