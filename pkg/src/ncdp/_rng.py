"""Seed handling shared by every stochastic routine."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def as_seed(seed: int) -> int:
    """Fold any Python int into the unsigned 64-bit range."""
    return int(seed) & _MASK64


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for ``seed`` refined by integer ``keys`` (trial index, stream id...).

    Derived streams are independent of the order in which they are requested,
    which is what makes parallel trial execution reproducible.
    """
    entropy = [as_seed(seed)] + [as_seed(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
