"""Portable seedable random numbers for reproducible experiments.

Everything randomized in this package (episode sampling, synthetic data,
head initialization, clustering seeds) draws from a SplitMix64 stream so
that runs are bit-reproducible given a master seed. Streams are derived
from (seed, key...) tuples rather than shared, so concurrent consumers
never contend for generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_DERIVE_SALT = 0xA0761D6478BD642F

_TWO53 = float(1 << 53)


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _key_to_u64(key: int | str) -> int:
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return key & _MASK


def derive_seed(seed: int, *keys: int | str) -> int:
    """Derive a child seed from a master seed and a key path.

    Distinct key paths give statistically independent streams; the same
    path always gives the same child seed.
    """
    h = _mix64((seed & _MASK) ^ _DERIVE_SALT)
    for key in keys:
        h = _mix64((h ^ _key_to_u64(key)) + _GAMMA & _MASK)
    return h


class SplitMix64:
    """Counter-based 64-bit generator (SplitMix64).

    The scalar and vectorized paths produce the identical stream, so
    callers may mix next_u64() and u64_array() freely.
    """

    def __init__(self, seed: int):
        self._seed = seed & _MASK
        self._state = self._seed

    def split(self, *keys: int | str) -> "SplitMix64":
        """Child generator for the given key path.

        Splitting is keyed on the construction seed, not current state, so
        the same key path always yields the same child no matter how many
        values were drawn in between.
        """
        return SplitMix64(derive_seed(self._seed, *keys))

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix64(self._state)

    def u64_array(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        out = _mix64_array(np.uint64(self._state) + steps)
        self._state = (self._state + n * _GAMMA) & _MASK
        return out

    def random(self) -> float:
        return (self.next_u64() >> 11) / _TWO53

    def floats(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1)."""
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) / _TWO53

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller on paired uniforms."""
        m = (n + 1) // 2
        # u1 shifted into (0, 1] so the log is always finite
        u1 = ((self.u64_array(m) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) / _TWO53
        u2 = (self.u64_array(m) >> np.uint64(11)).astype(np.float64) / _TWO53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def randint(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, population: int, k: int) -> list[int]:
        """k distinct indices from range(population), order randomized."""
        if k > population:
            raise ValueError(f"cannot sample {k} from population of {population}")
        idx = list(range(population))
        for i in range(k):
            j = i + self.randint(population - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]
