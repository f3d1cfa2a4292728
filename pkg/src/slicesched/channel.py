"""Rayleigh fading draws and Shannon achievable rates per PRB.

Transmit power and noise variance are folded into a single configured mean
SNR (equal power per PRB); only their product enters the rate formula.
Fading is i.i.d. across users, PRBs and slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig, derive_prb_bandwidth
from .schedulers import Allocation


@dataclass(frozen=True)
class ChannelSlot:
    """One slot's fading snapshot: squared gains for every (user, PRB) pair."""

    gain_sq: np.ndarray          # (U, K), |h|^2, unit-mean exponential
    mean_snr_linear: float
    prb_bandwidth_hz: float

    def __post_init__(self) -> None:
        if self.gain_sq.ndim != 2:
            raise ValueError("gain_sq must be a (users x PRBs) matrix")
        if not np.all(np.isfinite(self.gain_sq)) or np.any(self.gain_sq < 0):
            raise ValueError("gains must be finite and non-negative")


def draw_channel(cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelSlot:
    """Fresh i.i.d. Rayleigh draw: |h|^2 ~ Exp(1) per user per PRB."""
    gain_sq = rng.exponential(1.0, size=(cfg.num_users, cfg.num_prbs))
    return ChannelSlot(gain_sq=gain_sq,
                       mean_snr_linear=cfg.mean_snr_linear,
                       prb_bandwidth_hz=derive_prb_bandwidth(cfg))


def prb_rate(gain_sq: float, mean_snr: float, b_k_hz: float) -> float:
    """Achievable rate on one PRB in bits/s: B_k * log2(1 + snr*|h|^2)."""
    return b_k_hz * np.log2(1.0 + mean_snr * gain_sq)


def rate_matrix(slot: ChannelSlot) -> np.ndarray:
    """(U, K) matrix of per-PRB achievable rates in bits/s."""
    return slot.prb_bandwidth_hz * np.log2(1.0 + slot.mean_snr_linear * slot.gain_sq)


def user_rate(slot: ChannelSlot, alloc: Allocation, user: int) -> float:
    """Total bits/s for a user: sum of its assigned PRBs' rates."""
    prbs = [j for j, u in enumerate(alloc.assignment) if u == user]
    if not prbs:
        return 0.0
    return float(sum(prb_rate(slot.gain_sq[user, j], slot.mean_snr_linear,
                              slot.prb_bandwidth_hz) for j in prbs))


def all_user_rates(slot: ChannelSlot, alloc: Allocation) -> np.ndarray:
    """Vector of achieved bits/s per user under the given assignment."""
    rates = rate_matrix(slot)
    out = np.zeros(slot.gain_sq.shape[0])
    for j, u in enumerate(alloc.assignment):
        out[u] += rates[u, j]
    return out
