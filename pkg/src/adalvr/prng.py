"""Seeded randomness helpers.

All stochastic pieces share one construction: a 64-bit counter-based
generator (Philox), so that runs are reproducible across platforms and the
draw order is explicit at every call site.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def draw_index(rng: np.random.Generator, n: int) -> int:
    """Uniform index in [0, n) from a single uniform draw, rejection-free."""
    i = int(rng.random() * n)
    return n - 1 if i >= n else i
