"""Seed splitting.

Every random draw in the package comes from a stream addressed by
``(seed, purpose, index)``.  Path ``i`` of an ensemble always sees the same
noise regardless of how many paths are requested or how they are chunked.
"""

from __future__ import annotations

import numpy as np

# stream purposes
SIGNAL = 0
OBSERVATION = 1
TICKS = 2
REVERSAL = 3
START = 4
BENCHMARK = 5
CONDITIONED = 6
INITIAL = 7


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Generator for one (purpose, index) child of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.default_rng(ss)


def path_normals(seed: int, purpose: int, n_paths: int, shape: tuple[int, ...],
                 first: int = 0) -> np.ndarray:
    """Standard normals of shape ``(n_paths, *shape)``, one stream per path."""
    out = np.empty((n_paths, *shape))
    for i in range(n_paths):
        out[i] = stream(seed, purpose, first + i).standard_normal(shape)
    return out
