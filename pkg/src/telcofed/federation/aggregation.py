"""Sample-weighted averaging of quantized updates and leave-one-out attribution."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from telcofed import codec
from telcofed.agents.trainer import mse
from telcofed.errors import TelcoFedError
from telcofed.federation.secagg import commitment, dequantize, from_ring, ring_sum


class AggregationError(TelcoFedError, ValueError):
    pass


@dataclass(frozen=True)
class GlobalModel:
    version: int
    weights: tuple[float, ...]
    lineage: tuple[int, int] | None = None  # (previous version, round id)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def encode(self) -> bytes:
        prev, rnd = self.lineage if self.lineage else (-1, -1)
        return (
            codec.enc_int(self.version)
            + codec.enc_floats(self.weights)
            + codec.enc_int(prev)
            + codec.enc_int(rnd)
        )

    @property
    def digest(self) -> bytes:
        return codec.digest(self.encode())


@dataclass(frozen=True)
class ModelUpdate:
    """One participant's contribution; ``vector`` holds ring elements (uint64 values)."""

    round_id: int
    base_version: int
    operator: str
    vector: tuple[int, ...]
    sample_count: int
    commitment: bytes
    masked: bool

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        object.__setattr__(self, "vector", tuple(int(v) for v in self.vector))

    @classmethod
    def build(
        cls,
        round_id: int,
        base_version: int,
        operator: str,
        quantized: np.ndarray,
        sample_count: int,
        masked_vector: np.ndarray | None = None,
    ) -> ModelUpdate:
        ring = masked_vector if masked_vector is not None else np.asarray(quantized, dtype=np.int64).view(np.uint64)
        return cls(
            round_id=round_id,
            base_version=base_version,
            operator=operator,
            vector=tuple(int(v) for v in ring),
            sample_count=sample_count,
            commitment=commitment(quantized),
            masked=masked_vector is not None,
        )

    def ring(self) -> np.ndarray:
        return np.array(self.vector, dtype=np.uint64)

    def size_bytes(self) -> int:
        return 8 * len(self.vector) + 64

    def encode(self) -> bytes:
        return (
            codec.enc_int(self.round_id)
            + codec.enc_int(self.base_version)
            + codec.enc_str(self.operator)
            + codec.enc_uint(len(self.vector))
            + b"".join(codec.enc_uint(v) for v in self.vector)
            + codec.enc_int(self.sample_count)
            + codec.enc_bytes(self.commitment)
            + codec.enc_bool(self.masked)
        )


def _check(updates: Sequence[ModelUpdate], base: GlobalModel) -> None:
    if not updates:
        raise AggregationError("no updates to aggregate")
    if len({u.round_id for u in updates}) != 1:
        raise AggregationError("updates come from different rounds")
    if any(u.base_version != base.version for u in updates):
        raise AggregationError(f"updates were not trained on base version {base.version}")
    if len({u.masked for u in updates}) != 1:
        raise AggregationError("cannot mix masked and unmasked updates")
    if len({u.operator for u in updates}) != len(updates):
        raise AggregationError("duplicate update from one operator")
    if any(len(u.vector) != len(base.weights) for u in updates):
        raise AggregationError("update length does not match the model")
    for u in updates:
        if not u.masked and commitment(from_ring(u.ring())) != u.commitment:
            raise AggregationError(f"commitment of {u.operator} does not match its vector")


def aggregate(updates: Sequence[ModelUpdate], base: GlobalModel) -> GlobalModel:
    """Wrapping sum of the vectors, divided by total samples, added to the base weights."""
    _check(updates, base)
    total = sum(u.sample_count for u in updates)
    delta = dequantize(from_ring(ring_sum([u.ring() for u in updates])), total)
    weights = np.asarray(base.weights, dtype=np.float64) + delta
    return GlobalModel(base.version + 1, tuple(weights.tolist()), (base.version, updates[0].round_id))


@dataclass(frozen=True)
class AttributionScore:
    scores: Mapping[str, float]
    method: str = "leave-one-out"

    def __getitem__(self, operator: str) -> float:
        return self.scores[operator]


def score_contributions(
    updates: Sequence[ModelUpdate], base: GlobalModel, eval_set: Sequence[tuple[float, float]]
) -> AttributionScore:
    """Leave-one-out loss increase per operator, clamped at 0 and normalized to sum 1.

    A sole contributor scores 1. Masked updates cannot be separated and are rejected.
    """
    if not updates:
        raise AggregationError("no updates to score")
    if any(u.masked for u in updates):
        raise AggregationError("masked updates cannot be attributed individually")
    if len(updates) == 1:
        return AttributionScore(MappingProxyType({updates[0].operator: 1.0}))
    full = mse(aggregate(updates, base).weights, eval_set)
    raw = {}
    for u in updates:
        rest = [o for o in updates if o is not u]
        raw[u.operator] = max(0.0, mse(aggregate(rest, base).weights, eval_set) - full)
    total = sum(raw.values())
    scores = {op: (s / total if total > 0 else 0.0) for op, s in sorted(raw.items())}
    return AttributionScore(MappingProxyType(scores))


def withheld_attribution(operators: Sequence[str]) -> AttributionScore:
    """Placeholder for masked rounds: the coordinator only ever sees the sum."""
    return AttributionScore(MappingProxyType({op: 0.0 for op in sorted(operators)}), "withheld-masked")
