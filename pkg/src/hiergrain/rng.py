"""Pinned random streams.

Every run owns one xoshiro256** stream, seeded by expanding a 64-bit seed
with splitmix64. The generator is implemented here (rather than borrowed
from numpy) so that the engine's compiled hot loop can draw from it
directly, and so that outputs do not depend on numpy's internal stream
layout across versions.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GENERATOR_NAME = "xoshiro256** (splitmix64 seed expansion)"

_U = np.uint64
_SPLITMIX_GAMMA = _U(0x9E3779B97F4A7C15)
_DOUBLE_SCALE = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always")
def _rotl(x, k):
    return (x << _U(k)) | (x >> _U(64 - k))


@njit(cache=True)
def seed_state(seed):
    """Expand a 64-bit seed into a four-word xoshiro256** state."""
    state = np.empty(4, dtype=np.uint64)
    z = _U(seed)
    for i in range(4):
        z = z + _SPLITMIX_GAMMA
        x = z
        x = (x ^ (x >> _U(30))) * _U(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> _U(27))) * _U(0x94D049BB133111EB)
        state[i] = x ^ (x >> _U(31))
    return state


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * _U(5), 7) * _U(9)
    t = s[1] << _U(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    """Uniform double on [0, 1) with 53 random bits."""
    return np.float64(next_u64(s) >> _U(11)) * _DOUBLE_SCALE


@njit(cache=True)
def randbelow(s, n):
    """Unbiased integer on [0, n) by rejection of the short final bucket."""
    un = _U(n)
    threshold = (_U(0) - un) % un
    while True:
        x = next_u64(s)
        if x >= threshold:
            return np.int64(x % un)


class Stream:
    """A seeded random stream usable from Python and from compiled kernels.

    ``state`` is the raw ``uint64[4]`` array shared with the kernels;
    mutating it advances the stream.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.state = seed_state(np.uint64(self.seed))

    def uniform(self) -> float:
        return float(uniform(self.state))

    def randbelow(self, n: int) -> int:
        if n < 1:
            raise ValueError("randbelow requires n >= 1")
        return int(randbelow(self.state, n))

    def next_u64(self) -> int:
        return int(next_u64(self.state))


def derive_replicate_seed(master_seed: int, cell_index: int, replicate_index: int) -> int:
    """Seed for one (cell, replicate) run, derived from the sweep master seed.

    Uses numpy's SeedSequence hashing, which is documented as stable across
    platforms and releases.
    """
    seq = np.random.SeedSequence([int(master_seed), int(cell_index), int(replicate_index)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
