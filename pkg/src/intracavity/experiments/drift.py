"""Slow thermal drift of the tweezer focus relative to the cavity standing wave."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

# lambda_C / 2 = 390 nm in 100 minutes
DEFAULT_DRIFT_RATE = 390e-9 / (100 * 60.0)


@dataclass(frozen=True)
class DriftModel:
    drift_rate: float = DEFAULT_DRIFT_RATE  # m/s along the cavity axis
    walk_sigma: float = 0.0  # m per sqrt(s)

    def __post_init__(self):
        if self.walk_sigma < 0:
            raise ValueError("walk_sigma must be nonnegative")

    @classmethod
    def none(cls) -> "DriftModel":
        return cls(0.0, 0.0)


def inject_drift(t: float, model: DriftModel, rng: Optional[np.random.Generator] = None) -> float:
    """Axial offset accumulated after time ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    offset = model.drift_rate * t
    if model.walk_sigma > 0:
        if rng is None:
            raise ValueError("a random walk needs an rng")
        offset += rng.normal(0.0, model.walk_sigma * np.sqrt(t))
    return float(offset)


def drift_series(times, model: DriftModel, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Offsets at increasing ``times`` with one consistent random-walk path."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be nonnegative and nondecreasing")
    out = model.drift_rate * times
    if model.walk_sigma > 0:
        if rng is None:
            raise ValueError("a random walk needs an rng")
        dt = np.diff(times, prepend=0.0)
        out = out + np.cumsum(rng.normal(0.0, 1.0, times.size) * model.walk_sigma * np.sqrt(dt))
    return out
