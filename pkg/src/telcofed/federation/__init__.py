"""Federated coordination: planning, privacy mechanism, secure aggregation, attribution."""

from telcofed.federation.aggregation import (
    AggregationError,
    AttributionScore,
    GlobalModel,
    ModelUpdate,
    aggregate,
    score_contributions,
    withheld_attribution,
)
from telcofed.federation.privacy import add_dp_noise, clip_update
from telcofed.federation.scheduling import (
    CongestionSchedule,
    CongestionWindow,
    RoundConfig,
    RoundPlan,
    SchedulingError,
    plan_round,
)
from telcofed.federation.secagg import (
    RANGE_BOUND,
    SCALE,
    MaskingUnavailableError,
    QuantizationRangeError,
    commitment,
    dequantize,
    mask_update,
    pair_key,
    pairwise_seed,
    quantize,
    ring_sum,
)

__all__ = [
    "RANGE_BOUND",
    "SCALE",
    "AggregationError",
    "AttributionScore",
    "CongestionSchedule",
    "CongestionWindow",
    "GlobalModel",
    "MaskingUnavailableError",
    "ModelUpdate",
    "QuantizationRangeError",
    "RoundConfig",
    "RoundPlan",
    "SchedulingError",
    "add_dp_noise",
    "aggregate",
    "clip_update",
    "commitment",
    "dequantize",
    "mask_update",
    "pair_key",
    "pairwise_seed",
    "plan_round",
    "quantize",
    "ring_sum",
    "score_contributions",
    "withheld_attribution",
]
