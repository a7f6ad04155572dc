"""Counter-based seeded random streams.

Every random quantity in the package is drawn from :class:`CounterRng`, a
SplitMix64 finalizer applied to a counter. The algorithm is small enough to
reimplement anywhere, which is what makes seeded test vectors portable:

* the ``i``-th raw 64-bit word of stream ``seed`` is
  ``mix64((seed + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64)``;
* ``mix64(z)`` is ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
  z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2**64);
* a uniform in ``(0, 1]`` is ``((word >> 11) + 1) * 2**-53``;
* the ``j``-th standard normal uses words ``2j`` and ``2j + 1`` as
  ``u1, u2`` and returns ``sqrt(-2 ln u1) * cos(2 pi u2)`` (Box-Muller,
  cosine branch only).

Streams are addressed by position, so a draw never depends on how many
values were consumed by some other component. Independent sub-streams are
derived with :func:`derive_seed`.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *labels: object) -> int:
    """Derive an independent 64-bit seed from ``seed`` and a label path."""
    h = hashlib.sha256()
    h.update((seed & MASK64).to_bytes(8, "little"))
    for label in labels:
        raw = str(label).encode("utf-8")
        h.update(len(raw).to_bytes(8, "little"))
        h.update(raw)
    return int.from_bytes(h.digest()[:8], "little")


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class CounterRng:
    """Random stream addressed by counter. Instances are stateless views."""

    __slots__ = ("seed",)

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & MASK64

    def word(self, i: int) -> int:
        return mix64(self.seed + (i + 1) * GOLDEN_GAMMA)

    def words(self, n: int, start: int = 0) -> np.ndarray:
        """Raw uint64 words ``start .. start + n - 1``."""
        idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * np.uint64(GOLDEN_GAMMA)
            return _mix64_array(z)

    def uniforms(self, n: int, start: int = 0) -> np.ndarray:
        w = self.words(n, start)
        return ((w >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def normals(self, n: int, start: int = 0) -> np.ndarray:
        u = self.uniforms(2 * n, 2 * start)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)

    def below(self, bound: int, i: int) -> int:
        """Integer in ``[0, bound)`` from word ``i`` (multiply-shift reduction)."""
        return (self.word(i) * bound) >> 64

    def sample_indices(self, population: int, k: int) -> list[int]:
        """``k`` distinct indices from ``range(population)`` by partial Fisher-Yates."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} distinct values from {population}")
        pool = list(range(population))
        for i in range(k):
            j = i + self.below(population - i, i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])
