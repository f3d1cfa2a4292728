"""Delay-reliability machinery: the exponential violation surrogate, the
non-negative dual multiplier, and empirical reliability statistics.

The surrogate maps per-slot arrival/service imbalance to a differentiable
violation signal.  Note that it evaluates to the reliability target (a
positive number) even at perfect balance, so the dual ascends only on the
positive part and the reward penalizes only the positive part; see the
repo's decision notes for the sign discussion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def surrogate_y(arrivals: float, service: float, packet_bits: int,
                d_max_s: float, d_proc_s: float, chi_h: float,
                exp_cap: float = 50.0) -> float:
    """Exponential delay-violation surrogate for one user and slot.

    ``arrivals`` and ``service`` are packet counts for the slot; the exponent
    is capped before exponentiation to avoid overflow.
    """
    if not d_max_s > d_proc_s:
        raise ValueError("d_max_s must exceed d_proc_s")
    exponent = ((arrivals - service) / packet_bits) * (d_max_s - d_proc_s)
    exponent = min(exponent, exp_cap)
    return math.exp(exponent) - (1.0 - chi_h)


@dataclass
class DualVariable:
    """Projected-ascent Lagrange multiplier; never negative."""

    value: float = 0.0
    step: float = 0.01

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("dual step must be > 0")
        self.value = max(self.value, 0.0)

    def update(self, y: float) -> float:
        """Ascend on positive violation only; project back to [0, inf)."""
        self.value = max(self.value + self.step * max(y, 0.0), 0.0)
        return self.value


class EmptySampleError(ValueError):
    """Statistic requested over an empty delay sample set."""


def reliability(delays_s: np.ndarray | list[float], d_max_s: float) -> float:
    """Fraction of delays within the deadline."""
    delays = np.asarray(delays_s, dtype=float)
    if delays.size == 0:
        raise EmptySampleError("no delay samples")
    return float(np.mean(delays <= d_max_s))


def delay_cdf(delays_s: np.ndarray | list[float]) -> list[tuple[float, float]]:
    """Empirical CDF as (delay, cumulative fraction) pairs at distinct delays."""
    delays = np.asarray(delays_s, dtype=float)
    if delays.size == 0:
        raise EmptySampleError("no delay samples")
    values, counts = np.unique(delays, return_counts=True)
    cum = np.cumsum(counts) / delays.size
    return list(zip(values.tolist(), cum.tolist()))


@dataclass
class ReliabilityStats:
    """Mergeable pool of per-packet delay samples against a fixed target."""

    d_max_s: float
    chi_h: float

    def __post_init__(self) -> None:
        self._samples: list[float] = []

    def add(self, delays_s: list[float]) -> None:
        self._samples.extend(delays_s)

    def merge(self, other: "ReliabilityStats") -> None:
        self._samples.extend(other._samples)

    @property
    def samples(self) -> np.ndarray:
        return np.asarray(self._samples, dtype=float)

    def reliability(self) -> float:
        return reliability(self.samples, self.d_max_s)

    def meets_target(self) -> bool:
        return self.reliability() >= self.chi_h
