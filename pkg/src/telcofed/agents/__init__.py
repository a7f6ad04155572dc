"""Reference agents for the five canonical agent kinds, plus the local trainer."""

from telcofed.agents.anomaly import Anomaly, AnomalyReport, detect_anomalies
from telcofed.agents.experience import ExperienceModel, ExperienceScore, predict_experience
from telcofed.agents.forecast import forecast_capacity, holt_forecast
from telcofed.agents.optimization import CellState, OptimizationAdvice, advise_optimization
from telcofed.agents.sla import BreachForecast, SlaPolicy, SlaReport, monitor_sla
from telcofed.agents.trainer import LocalModel, local_train, mse, mse_gradient

__all__ = [
    "Anomaly",
    "AnomalyReport",
    "BreachForecast",
    "CellState",
    "ExperienceModel",
    "ExperienceScore",
    "LocalModel",
    "OptimizationAdvice",
    "SlaPolicy",
    "SlaReport",
    "advise_optimization",
    "detect_anomalies",
    "forecast_capacity",
    "holt_forecast",
    "local_train",
    "monitor_sla",
    "mse",
    "mse_gradient",
    "predict_experience",
]
