"""Deterministic random-number streams.

Every stochastic routine in the package draws from a generator built
here, so (seed, stream ids) fully determine the output no matter how
work is scheduled across processes.
"""

from __future__ import annotations

import numpy as np


def make_generator(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the sub-stream ``stream`` of master ``seed``.

    Distinct stream tuples yield statistically independent streams;
    the same (seed, stream) always reproduces the same draws.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


def derive_seed(seed: int, *stream: int) -> int:
    """Stable 63-bit integer derived from (seed, stream ids)."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
