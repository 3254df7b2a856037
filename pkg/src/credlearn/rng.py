"""Counter-based random substreams.

Every stochastic routine in the package draws from a generator keyed by
``(master_seed, *index)``. The key is hashed by :class:`numpy.random.SeedSequence`
and fed to a Philox counter-based bit generator, so replicate ``j`` produces the
same draws whether replicates run in order, in parallel, or alone.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def substream(master_seed: int, *index: int) -> np.random.Generator:
    """Return the generator for replicate ``index`` under ``master_seed``."""
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    key = tuple(int(i) for i in index)
    if any(i < 0 for i in key):
        raise ValueError("substream indices must be non-negative")
    seq = np.random.SeedSequence(entropy=int(master_seed) & MASK64, spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
