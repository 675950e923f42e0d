"""Portable seeded random numbers.

Every random decision in the package draws from :class:`Rng`, a pure-Python
xoshiro256** generator whose 256-bit state is expanded from a 64-bit seed
with SplitMix64.  Both algorithms are the published reference versions
(Blackman & Vigna), and all derived draws (doubles, bounded integers,
shuffles, Poisson counts) are written out here, so a given seed produces the
same stream on any platform and can be reproduced in any language.

Derived draws:

* ``random()``    -- ``(next() >> 11) * 2**-53``, a double in [0, 1).
* ``randbelow(n)`` -- Lemire's multiply-shift with rejection, unbiased.
* ``shuffle``     -- Fisher-Yates from the last index down.
* ``poisson(lam)`` -- sequential CDF inversion; ``lam`` above 30 is split
  into equal parts whose draws are summed.

:class:`LaneRng` runs many xoshiro256** streams side by side in numpy for
bulk Monte Carlo work.  Lane ``i`` is exactly ``Rng(derive_seed(seed, i))``,
and ``uniforms(n)`` reads the lanes round-robin (step-major).
"""

from __future__ import annotations

import math
from typing import MutableSequence, Sequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_POISSON_CHUNK = 30.0

T = TypeVar("T")


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step; returns ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically mix ``keys`` into ``seed`` to get an independent child seed."""
    state = seed & MASK64
    _, out = splitmix64(state)
    for key in keys:
        state = (out ^ (key & MASK64)) & MASK64
        _, out = splitmix64(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Rng:
    """xoshiro256** seeded through SplitMix64."""

    def __init__(self, seed: int) -> None:
        if seed < 0 or seed > MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        sm = seed
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self._s = s

    @classmethod
    def from_state(cls, state: Sequence[int]) -> "Rng":
        rng = cls.__new__(cls)
        rng.seed = None
        rng._s = [int(v) & MASK64 for v in state]
        return rng

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def uniforms(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = low + (high - low) * self.random()
        return out

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return m >> 64

    def shuffle(self, items: MutableSequence[T]) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def sample(self, population: Sequence[T], k: int) -> list[T]:
        """``k`` distinct elements, in draw order (partial Fisher-Yates)."""
        if not 0 <= k <= len(population):
            raise ValueError(f"cannot sample {k} from {len(population)}")
        pool = list(population)
        n = len(pool)
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def choices(self, n: int, k: int) -> list[int]:
        """``k`` indices drawn with replacement from ``range(n)``."""
        return [self.randbelow(n) for _ in range(k)]

    def poisson(self, lam: float) -> int:
        if lam < 0 or not math.isfinite(lam):
            raise ValueError(f"poisson rate must be finite and >= 0, got {lam}")
        if lam == 0:
            return 0
        parts = max(1, math.ceil(lam / _POISSON_CHUNK))
        sub = lam / parts
        total = 0
        for _ in range(parts):
            total += self._poisson_inversion(sub)
        return total

    def _poisson_inversion(self, lam: float) -> int:
        u = self.random()
        k = 0
        p = math.exp(-lam)
        cdf = p
        while u >= cdf:
            k += 1
            p *= lam / k
            cdf += p
            if p == 0.0:
                # cdf stalled below u by rounding; the tail mass is negligible
                break
        return k


def _rotl_arr(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class LaneRng:
    """``lanes`` independent xoshiro256** streams advanced together."""

    def __init__(self, seed: int, lanes: int = 1024) -> None:
        state = np.empty((4, lanes), dtype=np.uint64)
        for i in range(lanes):
            state[:, i] = Rng(derive_seed(seed, i))._s
        self._s = state
        self.lanes = lanes
        self._buffer = np.zeros(0)

    def _step(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        result = _rotl_arr(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self._s[3] = _rotl_arr(s3, 45)
        return result

    def uniforms(self, n: int) -> np.ndarray:
        chunks = [self._buffer]
        have = len(self._buffer)
        while have < n:
            u = (self._step() >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
            chunks.append(u)
            have += len(u)
        allu = np.concatenate(chunks)
        self._buffer = allu[n:]
        return allu[:n]


def poisson_array(source: "Rng | LaneRng", lam: float, n: int) -> np.ndarray:
    """``n`` Poisson(lam) draws by the same inversion as :meth:`Rng.poisson`.

    Uniforms are consumed part-major: all ``n`` draws for the first part of
    ``lam``, then the second, and so on.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"poisson rate must be finite and >= 0, got {lam}")
    out = np.zeros(n, dtype=np.int64)
    if lam == 0 or n == 0:
        return out
    parts = max(1, math.ceil(lam / _POISSON_CHUNK))
    sub = lam / parts
    for _ in range(parts):
        u = source.uniforms(n)
        k = np.zeros(n, dtype=np.int64)
        p = np.full(n, math.exp(-sub))
        cdf = p.copy()
        active = u >= cdf
        step = 0
        while active.any():
            step += 1
            p = p * (sub / step)
            if p[0] == 0.0:
                break
            cdf = cdf + p
            k += active
            active &= u >= cdf
        out += k
    return out
