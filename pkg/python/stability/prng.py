"""
Deterministic pseudorandom scheme.

A 64-bit seed is expanded by SplitMix64 into the 256-bit state of
xoshiro256**. Every random quantity in the package (source bits, random
rules) is drawn from this one scheme, so results are reproducible across
runs, machines and languages.

Two implementations share the same state layout:
  - Xoshiro256StarStar: small pure-Python generator for a handful of draws
  - xoshiro_outputs():  jitted bulk fill for millions of outputs
"""

import numpy as np

from ._jit import jit

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output for the already-advanced counter value x."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def seed_state(seed: int) -> tuple[int, int, int, int]:
    """Expand a 64-bit seed into four xoshiro256** state words."""
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return tuple(
        splitmix64(seed + k * GOLDEN_GAMMA) for k in range(1, 5)
    )  # type: ignore[return-value]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    """Port of xoshiro256** 1.0 on Python integers."""

    def __init__(self, state: tuple[int, int, int, int]):
        if not any(state):
            raise ValueError("xoshiro256** state must not be all zero")
        self._s = [word & MASK64 for word in state]

    @classmethod
    def from_seed(cls, seed: int) -> "Xoshiro256StarStar":
        return cls(seed_state(seed))

    @property
    def state(self) -> tuple[int, int, int, int]:
        return tuple(self._s)  # type: ignore[return-value]

    def next(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, bound: int) -> int:
        """Integer in [0, bound); modulo bias is below bound / 2^64."""
        return self.next() % bound


@jit
def _rotl64(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@jit
def _xoshiro_fill(state, out):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    for k in range(out.shape[0]):
        out[k] = _rotl64(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl64(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def xoshiro_outputs(seed: int, count: int) -> np.ndarray:
    """The first `count` 64-bit outputs of the generator seeded by `seed`."""
    state = np.array(seed_state(seed), dtype=np.uint64)
    out = np.empty(count, dtype=np.uint64)
    if count:
        _xoshiro_fill(state, out)
    return out
