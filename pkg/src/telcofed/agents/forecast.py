"""Holt linear-trend exponential smoothing."""

from __future__ import annotations

from collections.abc import Sequence

from telcofed.telemetry import KpiWindow


def holt_state(values: Sequence[float], alpha: float, beta: float) -> tuple[float, float]:
    """Final (level, trend) after smoothing ``values``.

    Initialised with level ``y1`` and trend ``y2 - y1``; updates start at ``y2``.
    """
    if len(values) < 2:
        raise ValueError("Holt smoothing needs at least 2 observations")
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ValueError("alpha and beta must lie in (0, 1]")
    level = float(values[0])
    trend = float(values[1]) - float(values[0])
    for y in values[1:]:
        prev = level
        level = alpha * y + (1 - alpha) * (prev + trend)
        trend = beta * (level - prev) + (1 - beta) * trend
    return level, trend


def holt_forecast(values: Sequence[float], horizon: int, alpha: float = 0.5, beta: float = 0.3) -> list[float]:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    level, trend = holt_state(values, alpha, beta)
    return [level + i * trend for i in range(1, horizon + 1)]


def forecast_capacity(window: KpiWindow, h: int, alpha: float = 0.5, beta: float = 0.3) -> list[float]:
    return holt_forecast(window.values, h, alpha, beta)


def step_interval(window: KpiWindow) -> int:
    """Sampling interval of a window: its last timestamp gap, or 1 for single points."""
    stamps = window.timestamps
    return stamps[-1] - stamps[-2] if len(stamps) > 1 else 1
