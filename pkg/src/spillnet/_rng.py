"""Keyed random streams.

Every random draw in the package comes from a generator derived from a
master seed plus a tuple of integers naming the unit of work, e.g.
``(WINDOW, w, i, j)``.  Results therefore do not depend on the order in
which units are evaluated or on how many workers evaluate them.
"""

import numpy as np

# stream namespaces
IMPUTE = 1
WINDOW = 2
REGIME = 3
CALIBRATE = 4
PAIR = 5


def stream(seed, *key):
    """Return a ``numpy.random.Generator`` for ``(seed, *key)``."""
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))
