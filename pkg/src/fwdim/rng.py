"""Counter-based random substreams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(seed, *key)`` through :class:`numpy.random.SeedSequence`
spawn keys. A substream depends only on its key, never on which worker asks
for it or in what order, so parallel runs reproduce serial runs bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream tags used as the first spawn-key component.
OUTER = 0
INNER = 1
NN_INIT = 2
NN_SHUFFLE = 3
BOOTSTRAP = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``.

    Negative or oversized seeds are reduced modulo 2**64.
    """
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
