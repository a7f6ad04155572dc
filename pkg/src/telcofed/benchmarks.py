"""Seeded anomaly-detection benchmark shared by certification and acceptance.

Each series is a constant baseline plus unit Gaussian noise, with
``ceil(rate * length)`` upward spikes injected after the detector warm-up.
Scoring counts only points a detector with window ``W`` can score
(index ``>= W``).
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass

from telcofed.rng import derive_seed
from telcofed.telemetry import GeneratorSpec, KpiWindow, generate_kpi_series, inject_anomalies

BENCHMARK_SEED = 0


@dataclass(frozen=True)
class BenchmarkSeries:
    window: KpiWindow
    anomalies: frozenset[int]  # indices


@dataclass(frozen=True)
class DetectionScore:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0

    @property
    def false_positive_rate(self) -> float:
        return self.fp / (self.fp + self.tn) if self.fp + self.tn else 0.0


def anomaly_benchmark(
    series: int = 100,
    length: int = 300,
    rate: float = 0.01,
    amplitude_sigmas: float = 8.0,
    noise_sigma: float = 1.0,
    warmup: int = 20,
    seed: int = BENCHMARK_SEED,
    base: float = 50.0,
    key_prefix: str = "bench",
) -> list[BenchmarkSeries]:
    out = []
    for i in range(series):
        key = f"{key_prefix}.a{i}"
        clean = generate_kpi_series(
            GeneratorSpec(base=base, noise_sigma=noise_sigma, length=length, seed=derive_seed(seed, "bench-noise", i)), key
        )
        window, idx = inject_anomalies(
            clean, rate, amplitude_sigmas, noise_sigma, derive_seed(seed, "bench-inject", i), warmup
        )
        out.append(BenchmarkSeries(window, frozenset(idx)))
    return out


def score_detection(flagged: Iterable[int], truth: Iterable[int], n: int, warmup: int) -> DetectionScore:
    """Confusion counts over indices ``warmup .. n-1``."""
    evaluable = set(range(warmup, n))
    f = set(flagged) & evaluable
    t = set(truth) & evaluable
    return DetectionScore(len(f & t), len(f - t), len(t - f), len(evaluable - t - f))


def run_benchmark(
    detect: Callable[[KpiWindow], Iterable[int]], bench: Iterable[BenchmarkSeries], warmup: int = 20
) -> DetectionScore:
    """Pool confusion counts of ``detect`` (returning flagged indices) over every series."""
    tp = fp = fn = tn = 0
    for s in bench:
        c = score_detection(detect(s.window), s.anomalies, len(s.window), warmup)
        tp, fp, fn, tn = tp + c.tp, fp + c.fp, fn + c.fn, tn + c.tn
    return DetectionScore(tp, fp, fn, tn)
