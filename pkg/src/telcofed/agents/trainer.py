"""Local trainer for the reference federated task: 1-D linear regression.

Model ``y = w*x + b`` fitted by full-batch gradient descent on mean squared
error. The loss is quadratic with Hessian ``H = (2/n) X^T X`` where
``X = [x, 1]``, so the loss trace is non-increasing whenever
``lr <= 2 / lambda_max(H)`` (see :func:`stability_bound`).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from telcofed.rng import CounterRng


@dataclass(frozen=True)
class LocalModel:
    weights: tuple[float, ...]
    lineage: tuple[int, ...] = ()

    @property
    def w(self) -> float:
        return self.weights[0]

    @property
    def b(self) -> float:
        return self.weights[1]


def _arrays(data: Sequence[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    if len(data) == 0:
        raise ValueError("training data must be non-empty")
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("training data contains non-finite values")
    return arr[:, 0], arr[:, 1]


def mse(weights: Sequence[float], data: Sequence[tuple[float, float]]) -> float:
    x, y = _arrays(data)
    r = weights[0] * x + weights[1] - y
    return float(np.mean(r * r))


def mse_gradient(weights: Sequence[float], data: Sequence[tuple[float, float]]) -> tuple[float, float]:
    x, y = _arrays(data)
    r = weights[0] * x + weights[1] - y
    return float(2.0 * np.mean(r * x)), float(2.0 * np.mean(r))


def stability_bound(data: Sequence[tuple[float, float]]) -> float:
    """Largest learning rate for which gradient descent cannot increase the loss."""
    x, _ = _arrays(data)
    design = np.column_stack([x, np.ones_like(x)])
    hessian = 2.0 * design.T @ design / len(x)
    return float(2.0 / np.linalg.eigvalsh(hessian)[-1])


def local_train(
    base: LocalModel, data: Sequence[tuple[float, float]], epochs: int, lr: float
) -> tuple[LocalModel, list[float]]:
    """Train from ``base``; returns the model and the loss after each epoch."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    x, y = _arrays(data)
    w, b = float(base.weights[0]), float(base.weights[1])
    trace = []
    for _ in range(epochs):
        r = w * x + b - y
        gw, gb = 2.0 * np.mean(r * x), 2.0 * np.mean(r)
        w, b = float(w - lr * gw), float(b - lr * gb)
        r = w * x + b - y
        trace.append(float(np.mean(r * r)))
    if not (math.isfinite(w) and math.isfinite(b)):
        raise FloatingPointError("training diverged")
    return LocalModel((w, b), base.lineage), trace


def make_regression_data(
    n: int, seed: int, w: float = 3.0, b: float = 0.0, noise_sigma: float = 0.1, x_range: tuple[float, float] = (-1.0, 1.0)
) -> list[tuple[float, float]]:
    """``n`` seeded samples of ``y = w*x + b + N(0, noise_sigma)``, x uniform on ``x_range``."""
    rng = CounterRng(seed)
    lo, hi = x_range
    xs = lo + (hi - lo) * rng.uniforms(n)
    noise = rng.normals(n, start=n) * noise_sigma
    return [(float(x), float(w * x + b + e)) for x, e in zip(xs, noise)]


def partition(data: Sequence[tuple[float, float]], parts: int) -> list[list[tuple[float, float]]]:
    """Disjoint contiguous partitions of nearly equal size."""
    size, extra = divmod(len(data), parts)
    out, start = [], 0
    for i in range(parts):
        end = start + size + (1 if i < extra else 0)
        out.append(list(data[start:end]))
        start = end
    return out
