"""Seeded random number generation.

All randomness goes through numpy's ``PCG64`` bit generator.  Derived
streams for independent work units (grid cells, coordinates, chains) are
obtained with :func:`derive_seed`, which feeds ``(seed, *keys)`` to a
``SeedSequence`` as entropy plus spawn key.  The mapping is stable across
platforms for a fixed numpy major version.
"""

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"


def make_rng(seed):
    """Return a ``Generator`` for ``seed`` (int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def derive_seed(seed, *keys):
    """Split function: a ``SeedSequence`` for the work unit ``keys`` under ``seed``."""
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))


def derive_rng(seed, *keys):
    return make_rng(derive_seed(seed, *keys))
