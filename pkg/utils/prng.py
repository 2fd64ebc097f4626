"""
Portable xoshiro256** streams.

Every source of randomness in an environment or policy is one of these
streams. A stream is seeded from a 64-bit seed through splitmix64, and
named sub-streams are derived by hashing (seed, name), so adding a new
consumer never shifts the draws of an existing one.
"""

import hashlib
from typing import List, Sequence, TypeVar

from utils.errors import InvalidSeed

PRNG_ALGORITHM = "xoshiro256**"

_MASK64 = (1 << 64) - 1
_TWO64 = 1 << 64

T = TypeVar("T")


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def _splitmix64(state: int):
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < _TWO64:
        raise InvalidSeed(seed)
    return seed


def derive_seed(seed: int, name: str) -> int:
    """Hash (seed, name) into a new 64-bit seed."""
    digest = hashlib.sha256(f"{check_seed(seed)}/{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class Xoshiro256:

    def __init__(self, seed: int):
        self.seed = check_seed(seed)
        gen = _splitmix64(self.seed)
        self._s = [next(gen) for _ in range(4)]

    @classmethod
    def derive(cls, seed: int, name: str) -> "Xoshiro256":
        return cls(derive_seed(seed, name))

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError(f"below() needs a positive bound, got {n}")
        limit = _TWO64 - (_TWO64 % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def choice(self, items: Sequence[T]) -> T:
        return items[self.below(len(items))]

    def sample(self, items: Sequence[T], k: int) -> List[T]:
        """k distinct items in draw order (partial Fisher-Yates)."""
        pool = list(items)
        if not 0 <= k <= len(pool):
            raise ValueError(f"cannot sample {k} items from {len(pool)}")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def getstate(self) -> tuple:
        return tuple(self._s)

    def setstate(self, state: tuple):
        self._s = list(state)
