"""Reproducible random number streams.

All randomness in the package flows through `substream`, which derives
an independent counter-based generator from a root seed and an integer
path. Streams depend only on (seed, path), never on execution order or
worker count, so any replication can be recomputed in isolation and
parallel runs are bit-identical to serial ones.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a Philox generator uniquely determined by (seed, path).

    Distinct paths yield statistically independent streams. Path
    components must be non-negative integers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))
