"""Norm clipping and the Gaussian mechanism.

Only the mechanism is implemented; no privacy budget is accounted.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from telcofed.rng import CounterRng


def clip_update(delta: Sequence[float], clip: float) -> np.ndarray:
    """Scale ``delta`` down to L2 norm ``clip`` if it is longer."""
    if clip <= 0:
        raise ValueError("clip bound must be positive")
    d = np.asarray(delta, dtype=np.float64)
    norm = float(np.linalg.norm(d))
    if norm <= clip:
        return d.copy()
    return d * (clip / norm)


def add_dp_noise(delta: Sequence[float], sigma: float, clip: float, seed: int) -> np.ndarray:
    """Add ``N(0, (sigma * clip)^2)`` per coordinate; ``sigma == 0`` returns a copy."""
    if sigma < 0:
        raise ValueError("noise multiplier must be >= 0")
    d = np.asarray(delta, dtype=np.float64)
    if sigma == 0:
        return d.copy()
    return d + sigma * clip * CounterRng(seed).normals(d.size)
