"""SLA compliance and breach forecasting."""

from __future__ import annotations

from dataclasses import dataclass

from telcofed.agents.forecast import forecast_capacity, step_interval
from telcofed.telemetry import KpiWindow


@dataclass(frozen=True)
class SlaPolicy:
    threshold: float
    target_fraction: float = 0.95
    horizon: int = 10
    alpha: float = 0.5
    beta: float = 0.3


@dataclass(frozen=True)
class BreachForecast:
    step: int
    timestamp: int
    fraction_beyond: float


@dataclass(frozen=True)
class SlaReport:
    compliant: bool
    observed_fraction: float
    breach_forecast: BreachForecast | None


def monitor_sla(window: KpiWindow, policy: SlaPolicy) -> SlaReport:
    """Compliance over the window plus a Holt forecast of the first breach.

    A sample complies when it is at or below the threshold. A forecast
    step breaches when the predicted value reaches the threshold.
    """
    if len(window) == 0:
        raise ValueError("cannot assess an empty window")
    if policy.horizon < 1:
        raise ValueError("horizon must be >= 1")
    values = window.values
    within = sum(1 for v in values if v <= policy.threshold) / len(values)
    breach = None
    if len(window) >= 2:
        forecast = forecast_capacity(window, policy.horizon, policy.alpha, policy.beta)
        beyond = [i for i, y in enumerate(forecast, start=1) if y >= policy.threshold]
        if beyond:
            step = beyond[0]
            breach = BreachForecast(
                step=step,
                timestamp=window.timestamps[-1] + step * step_interval(window),
                fraction_beyond=len(beyond) / policy.horizon,
            )
    return SlaReport(within >= policy.target_fraction, within, breach)
