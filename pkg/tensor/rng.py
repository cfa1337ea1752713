"""Seeded random streams.

All sampling goes through ``make_rng``. The bit generator is Philox, a
counter-based generator whose output depends only on the key derived from
``(seed, *stream)``: the same key always replays the same draws regardless
of thread count or the order in which streams are created.
"""

import numpy as np

ALGORITHM = "philox4x64"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Build a generator for ``seed`` and an optional stream path.

    Args:
        seed: Non-negative 64-bit seed (mandatory).
        stream: Extra integers naming an independent sub-stream,
            e.g. ``(sample_index,)`` or ``(layer, kernel)``.
    """
    if seed is None:
        raise ValueError("A seed is required for every sampling API")
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    key = np.random.SeedSequence([int(seed), *(int(s) for s in stream)])
    return np.random.Generator(np.random.Philox(key))
