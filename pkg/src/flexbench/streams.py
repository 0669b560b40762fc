"""Deterministic RNG substreams.

Every random draw in a run comes from a generator keyed by (run seed, domain
tag, ...indices).  Draws therefore never depend on evaluation order or on how
many other components consumed randomness, which is what makes fast/realtime
and re-runs bit-identical.
"""

import numpy as np

OCCUPANT_DOMAIN = 1
COMM_DOMAIN = 2


def substream(*key: int) -> np.random.Generator:
    """Independent generator for an integer key tuple."""
    return np.random.default_rng(np.random.SeedSequence(tuple(int(k) for k in key)))
