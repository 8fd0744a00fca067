"""Small deterministic PRNG (xoshiro256**) used by the evaluation and
synthesis layers.

A fully specified generator keeps shuffles, noise draws, and therefore every
report byte-stable across platforms and library versions.  Streams for
parallel work are derived by mixing a 64-bit label into the seed, so results
do not depend on scheduling order.
"""

from __future__ import annotations

import math

_MASK = 0xFFFFFFFFFFFFFFFF


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def mix_seed(seed: int, label: int) -> int:
    """Derive a stream seed from a base seed and an integer label."""
    _, a = _splitmix64(seed & _MASK)
    _, b = _splitmix64(label & _MASK)
    return (a ^ ((b << 1) & _MASK) ^ 0xD1B54A32D192ED03) & _MASK


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 state seeding."""

    def __init__(self, seed: int):
        state = seed & _MASK
        self._s = []
        for _ in range(4):
            state, word = _splitmix64(state)
            self._s.append(word)
        self._gauss_cache: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def normal(self) -> float:
        """Standard normal via Box-Muller (pairs cached)."""
        if self._gauss_cache is not None:
            z = self._gauss_cache
            self._gauss_cache = None
            return z
        # u1 in (0, 1] so the log is finite
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss_cache = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int) -> list[float]:
        return [self.normal() for _ in range(n)]

    def randbelow(self, n: int) -> int:
        """Integer in [0, n); tiny modulo bias is irrelevant here."""
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
