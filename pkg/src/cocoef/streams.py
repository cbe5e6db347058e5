"""Deterministic partitioning of randomness into keyed substreams.

Every random decision in a run (task generation, data allocation, model
init, straggler draws, compressor randomness) comes from its own generator
keyed by ``(root seed, stream tag, *indices)``.  Substreams are independent
of the order in which they get created, so devices and trials can be
simulated in any order without changing results, and raising the trial
count never perturbs earlier trials.
"""

from __future__ import annotations

import numpy as np

# Stream tags.  The values are part of the reproducibility contract:
# changing them changes every seeded run.
TASK = 0
ALLOCATION = 1
THETA0 = 2
STRAGGLER = 3
COMPRESSOR = 4

_SEED_MASK = (1 << 64) - 1


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a fresh generator for the ``(seed, *path)`` substream."""
    return np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, *path]))
