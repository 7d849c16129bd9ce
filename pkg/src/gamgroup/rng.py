"""Seeded random streams.

Every random draw in the package goes through :func:`stream`. The bit
generator is Philox-4x64-10 (counter-based, as shipped with numpy). A
stream is identified by ``(seed, stream_id)``, which become the two 64-bit
words of the Philox key; the counter starts at zero. Distinct stream ids
therefore give statistically independent sequences without any sequential
state shared between them, and a given ``(seed, stream_id)`` always yields
the same sequence.

Stream ids used by the generators are listed in ``STREAMS``.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# Fixed stream assignments. Never renumber these.
STREAMS = {
    "x": 0,
    "z": 1,
    "label_noise": 2,
    "validation_split": 10,
    "fold_assignment": 11,
    "permutation": 1000,  # plus repeat index
}


def stream(seed, stream_id):
    """Return a ``numpy.random.Generator`` for one named substream."""
    key = np.array([int(seed) & _MASK64, int(stream_id) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
