"""Counter-based random numbers built on SplitMix64.

Every trial gets its own 64-bit seed ``mix(master_seed, k)`` and every draw
within a trial is the ``j``-th SplitMix64 output of that seed. A draw is
therefore a pure function of ``(master_seed, k, j)``, which is what makes
trial execution order irrelevant.

Scalar helpers work on Python ints; the ``*_array`` variants work on
``uint64`` arrays and produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def finalize(z: int) -> int:
    """SplitMix64 output function (Stafford variant 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix(seed: int, k: int) -> int:
    """Seed of the ``k``-th child stream of ``seed``."""
    return finalize(seed + (k + 1) * GOLDEN_GAMMA)


def uniform(seed: int, j: int) -> float:
    """``j``-th uniform draw in [0, 1) of the stream seeded with ``seed``."""
    return (finalize(seed + (j + 1) * GOLDEN_GAMMA) >> 11) * _INV_2_53


_G = np.uint64(GOLDEN_GAMMA)
_M1U = np.uint64(_M1)
_M2U = np.uint64(_M2)


def finalize_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1U
        z = (z ^ (z >> np.uint64(27))) * _M2U
    return z ^ (z >> np.uint64(31))


def mix_array(seed: int, ks: np.ndarray) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + (ks + np.uint64(1)) * _G
    return finalize_array(z)


def uniform_array(seeds: np.ndarray, j: int) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = seeds + np.uint64(((j + 1) * GOLDEN_GAMMA) & MASK64)
    return (finalize_array(z) >> np.uint64(11)).astype(np.float64) * _INV_2_53
