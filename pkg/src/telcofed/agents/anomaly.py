"""Rolling median/MAD anomaly detector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from telcofed.telemetry import KpiWindow

MAD_SCALE = 1.4826
MAD_FLOOR = 1e-9


@dataclass(frozen=True)
class Anomaly:
    index: int
    timestamp: int
    value: float
    score: float


@dataclass(frozen=True)
class AnomalyReport:
    anomalies: tuple[Anomaly, ...]
    window: int
    threshold: float

    @property
    def indices(self) -> list[int]:
        return [a.index for a in self.anomalies]


def robust_scores(values: np.ndarray, window: int) -> np.ndarray:
    """Score of every point ``t >= window`` against the ``window`` points before it."""
    trailing = sliding_window_view(values[:-1], window)
    med = np.median(trailing, axis=1)
    mad = np.median(np.abs(trailing - med[:, None]), axis=1)
    return np.abs(values[window:] - med) / (MAD_SCALE * mad + MAD_FLOOR)


def detect_anomalies(series: KpiWindow, window: int = 20, threshold: float = 3.5) -> AnomalyReport:
    """Flag points whose robust z-score against the trailing window exceeds ``threshold``."""
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(series)
    if n <= window:
        raise ValueError(f"series of length {n} is too short for window {window}")
    values = np.asarray(series.values, dtype=np.float64)
    scores = robust_scores(values, window)
    stamps = series.timestamps
    flagged = np.nonzero(scores > threshold)[0]
    anomalies = tuple(
        Anomaly(int(i) + window, stamps[i + window], float(values[i + window]), float(scores[i]))
        for i in flagged
    )
    return AnomalyReport(anomalies, window, threshold)
