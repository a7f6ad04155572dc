"""Experience predictor: geometric mean of clamped latency, loss and throughput scores."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class ExperienceModel:
    latency_floor_ms: float = 50.0
    latency_ceiling_ms: float = 500.0
    loss_ceiling: float = 0.05


@dataclass(frozen=True)
class ExperienceScore:
    score: float
    subscores: Mapping[str, float] = field(default_factory=dict)


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def predict_experience(
    latency_ms: float,
    loss_ratio: float,
    throughput_mbps: float,
    demand_mbps: float,
    model: ExperienceModel = ExperienceModel(),
) -> ExperienceScore:
    if min(latency_ms, loss_ratio, throughput_mbps) < 0:
        raise ValueError("experience inputs must be non-negative")
    if demand_mbps <= 0:
        raise ValueError("demand must be positive")
    span = model.latency_ceiling_ms - model.latency_floor_ms
    subs = {
        "latency": clamp01(1.0 - (latency_ms - model.latency_floor_ms) / span),
        "loss": clamp01(1.0 - loss_ratio / model.loss_ceiling),
        "throughput": clamp01(throughput_mbps / demand_mbps),
    }
    score = clamp01(float(np.cbrt(subs["latency"] * subs["loss"] * subs["throughput"])))
    return ExperienceScore(score, MappingProxyType(subs))
