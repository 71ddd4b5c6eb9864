"""Soft CDS weights sigma(Delta / tau) and the adaptive temperature."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np
from scipy.special import expit

from tabcds.errors import PreconditionError

# Keeps weights strictly inside (0, 1) where the sigmoid saturates in floating point.
_WEIGHT_FLOOR = np.finfo(np.float64).tiny
_WEIGHT_CEIL = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class AdaptiveTemperature:
    """
    Per-task exponential running average of |Delta|, clipped to [tau_min, tau_max].
    """
    taus: Tuple[float, ...]
    tau_min: float = 1.0
    tau_max: float = 50.0
    decay: float = 0.995

    def __post_init__(self):
        if not 0.0 < self.tau_min <= self.tau_max:
            raise PreconditionError(f"need 0 < tau_min <= tau_max, got [{self.tau_min}, {self.tau_max}]")
        if not 0.0 <= self.decay < 1.0:
            raise PreconditionError(f"decay must lie in [0, 1), got {self.decay}")
        object.__setattr__(self, 'taus', tuple(float(t) for t in self.taus))

    @classmethod
    def initial(cls, num_tasks: int, tau_min: float = 1.0, tau_max: float = 50.0, decay: float = 0.995,
                start: float = 1.0) -> "AdaptiveTemperature":
        """Every task starts at ``start`` (1.0), moved into the clip bounds."""
        value = min(max(start, tau_min), tau_max)
        return cls(tuple([value] * num_tasks), tau_min, tau_max, decay)

    def tau(self, task: int) -> float:
        return self.taus[task]


def cds_weight(delta: Union[float, np.ndarray], temperature: AdaptiveTemperature,
               task: int) -> Union[float, np.ndarray]:
    """Logistic sigmoid of Delta / tau_i, kept strictly inside (0, 1)."""
    tau = temperature.tau(task)
    if not temperature.tau_min <= tau <= temperature.tau_max:
        raise PreconditionError(f"tau {tau} outside [{temperature.tau_min}, {temperature.tau_max}]")
    weights = np.clip(expit(np.asarray(delta, dtype=np.float64) / tau), _WEIGHT_FLOOR, _WEIGHT_CEIL)
    if np.ndim(weights) == 0:
        return float(weights)
    return weights


def update_temperature(temperature: AdaptiveTemperature, deltas, task: int) -> AdaptiveTemperature:
    """tau_i <- clip(decay * tau_i + (1 - decay) * mean|Delta|, tau_min, tau_max); empty batches are a no-op."""
    deltas = np.asarray(deltas, dtype=np.float64).reshape(-1)
    if deltas.size == 0:
        return temperature
    decay = temperature.decay
    raw = decay * temperature.tau(task) + (1.0 - decay) * float(np.mean(np.abs(deltas)))
    taus = list(temperature.taus)
    taus[task] = min(max(raw, temperature.tau_min), temperature.tau_max)
    return replace(temperature, taus=tuple(taus))


@dataclass(frozen=True, eq=False)
class CdsWeights:
    """Weights for the candidates of one target task, aligned with ``deltas``."""
    task: int
    deltas: np.ndarray
    weights: np.ndarray
    tau: float

    @classmethod
    def compute(cls, deltas, temperature: AdaptiveTemperature, task: int) -> "CdsWeights":
        deltas = np.asarray(deltas, dtype=np.float64).reshape(-1)
        return cls(task, deltas, np.atleast_1d(cds_weight(deltas, temperature, task)), temperature.tau(task))
