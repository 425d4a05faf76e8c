"""Deterministic seed derivation and counter-based uniform variates.

Everything here is a pure function of 64-bit integers (splitmix64 mixing),
so independent streams can be derived without coordination between workers
and edge-level noise can be recomputed instead of stored.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer: bijective 64-bit mix."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def spawn(seed: int, index: int) -> int:
    """Child seed: splitmix64 output at counter `index` for stream `seed`."""
    return mix64((seed + (index + 1) * _GOLDEN) & _MASK64)


def replicate_seed(seed_base: int, replicate: int) -> int:
    """Per-replicate stream: seed_base XOR splitmix(replicate index)."""
    return (seed_base & _MASK64) ^ spawn(0x5EED, replicate)


def counter_uniforms(seed: int, counters: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) indexed by integer counters (vectorized splitmix64)."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + (counters.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
    # top 53 bits -> double in [0, 1)
    return (z >> np.uint64(11)) * 2.0 ** -53


def counter_uniform(seed: int, counter: int) -> float:
    return float(counter_uniforms(seed, np.asarray([counter], dtype=np.uint64))[0])
