"""Deterministic random-number plumbing.

All randomness in the package flows through numpy Generators seeded from
explicit integer keys, so any run is reproducible bit for bit. Derived
streams (per epoch, per item, per layer) are keyed by tuples of integers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(*keys: int) -> np.random.Generator:
    """Generator seeded from one or more integer keys (order-sensitive)."""
    if not keys:
        raise ValueError("make_rng requires at least one key")
    return np.random.default_rng([int(k) & _MASK64 for k in keys])
