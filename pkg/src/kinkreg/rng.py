"""Deterministic random-stream derivation.

Every stochastic routine in the package draws from a stream derived from a
user seed plus a tuple of integer indices (replication number, bootstrap draw
number, ...).  Streams for different index tuples are statistically
independent, and the stream for a given tuple does not depend on how many
other streams were consumed, so parallel and sequential schedules produce
identical output.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream"]


def substream(seed: int, *indices: int) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *indices)``.

    Uses the counter-based Philox bit generator so that derived streams are
    cheap to construct and independent across index tuples.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, indices)])))
