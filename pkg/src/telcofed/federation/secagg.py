"""Fixed-point quantization and pairwise additive masking.

Updates are scaled by ``2**24`` and rounded to signed 64-bit integers, then
treated as elements of the ring of integers modulo ``2**64``. Each pair of
participants shares a seed; the earlier participant in the round's order
adds the seed's mask stream and the later one subtracts it, so the masks
cancel exactly in the sum while every individual vector looks uniform.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from telcofed import codec
from telcofed.crypto import KeyAgreement
from telcofed.errors import TelcoFedError
from telcofed.rng import CounterRng

SCALE_BITS = 24
SCALE = 1 << SCALE_BITS
RANGE_BOUND = float(1 << 20)


class QuantizationRangeError(TelcoFedError, OverflowError):
    pass


class MaskingUnavailableError(TelcoFedError, ValueError):
    pass


def quantize(delta: Sequence[float], sample_count: int) -> np.ndarray:
    """``round(delta * sample_count * 2**24)`` as int64 (round half to even)."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    weighted = np.asarray(delta, dtype=np.float64) * sample_count
    if not np.all(np.isfinite(weighted)) or np.any(np.abs(weighted) >= RANGE_BOUND):
        raise QuantizationRangeError(f"|delta * count| must stay below 2**20 (count={sample_count})")
    return np.rint(weighted * SCALE).astype(np.int64)


def dequantize(q: Sequence[int] | np.ndarray, total_samples: int) -> np.ndarray:
    if total_samples < 1:
        raise ValueError("total_samples must be >= 1")
    return np.asarray(q, dtype=np.int64).astype(np.float64) / (SCALE * total_samples)


def to_ring(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=np.int64).view(np.uint64)


def from_ring(u: np.ndarray) -> np.ndarray:
    return np.asarray(u, dtype=np.uint64).view(np.int64)


def ring_sum(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise sum modulo ``2**64``."""
    total = np.zeros(len(vectors[0]), dtype=np.uint64)
    for v in vectors:
        total = total + np.asarray(v, dtype=np.uint64)
    return total


def mask_stream(seed: int, length: int) -> np.ndarray:
    return CounterRng(seed).words(length)


def pair_key(a: str, b: str) -> frozenset[str]:
    return frozenset((a, b))


def mask_update(
    q: np.ndarray,
    me: str,
    participants: Sequence[str],
    seeds: Mapping[frozenset[str], int],
) -> np.ndarray:
    """Masked ring vector of participant ``me``.

    ``seeds`` holds one shared seed per unordered pair of participants.
    """
    if len(participants) < 2:
        raise MaskingUnavailableError("masking needs at least two participants")
    if me not in participants:
        raise ValueError(f"{me!r} is not a participant")
    mine = participants.index(me)
    out = to_ring(q).copy()
    for pos, other in enumerate(participants):
        if other == me:
            continue
        stream = mask_stream(seeds[pair_key(me, other)], len(out))
        out = out + stream if mine < pos else out - stream
    return out


def pairwise_seed(agreement: KeyAgreement, peer_public: bytes, round_id: int, a: str, b: str) -> int:
    """Seed both ends of a pair derive independently from their X25519 secret."""
    lo, hi = sorted((a, b))
    material = (
        agreement.shared_secret(peer_public)
        + codec.enc_int(round_id)
        + codec.enc_str(lo)
        + codec.enc_str(hi)
    )
    return int.from_bytes(codec.digest(material)[:8], "little")


def commitment(q: np.ndarray) -> bytes:
    """Digest of a quantized (unmasked) vector."""
    return codec.digest(codec.enc_ints([int(v) for v in np.asarray(q, dtype=np.int64)]))
