"""Counter-keyed random substreams.

Every random draw in the package comes from a generator keyed by the master
seed plus a tuple of integers naming its purpose (codebook replicate, layer,
trial block ...).  Two calls with the same key always see the same stream, no
matter which order they run in, so parallel and serial execution agree.
"""

import numpy as np

# Purpose tags, first element of every key.
CODEBOOK = 0
TRIALS = 1
OPTIMIZER = 2
EQUIVOCATION = 3
WIRETAP = 4

_MASK64 = (1 << 64) - 1


def substream(seed, *key):
    """Return a ``numpy.random.Generator`` for ``(seed, *key)``."""
    if int(seed) < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def sample_rows(rng, table, rows):
    """Draw one column index per entry of ``rows`` from ``table[rows]``.

    ``table`` is row-stochastic; ``rows`` is an integer array of any shape.
    Uses inverse-CDF sampling with one uniform per draw.
    """
    rows = np.asarray(rows)
    cdf = np.cumsum(table, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(rows.shape)
    # count of cdf entries strictly below u gives the sampled column
    return (u[..., None] >= cdf[rows][..., :-1]).sum(axis=-1).astype(np.int64)
