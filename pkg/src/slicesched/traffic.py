"""Arrival processes: eMBB Poisson and dexterity-modulated two-state MMPP.

HRLLC command traffic follows a two-state Markov-modulated Poisson process
(slow / bursty).  The continuous-time chain is discretized per slot with
exact exponential holding probabilities.  The task dexterity index (DXI)
reduces the instantaneous intensity: a harder task means the operator issues
fewer command updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig


class DegenerateChainError(ValueError):
    """Both transition rates are zero: no stationary distribution."""


def stationary_probs(alpha: float, beta: float) -> tuple[float, float]:
    """Stationary (pi1, pi2) of the two-state chain with rates alpha, beta."""
    if alpha + beta <= 0:
        raise DegenerateChainError("alpha + beta must be > 0")
    return beta / (alpha + beta), alpha / (alpha + beta)


def mean_rate(alpha: float, beta: float, lam1: float, lam2: float) -> float:
    """Long-run mean arrival intensity pi1*lam1 + pi2*lam2 (packets/slot)."""
    pi1, pi2 = stationary_probs(alpha, beta)
    return pi1 * lam1 + pi2 * lam2


def effective_intensity(lam_state: float, beta_dex: float, dxi: float) -> float:
    """Task-coupled intensity, clamped at zero (a Poisson mean cannot be negative)."""
    return max(lam_state - beta_dex * dxi, 0.0)


@dataclass
class MmppChain:
    """Per-user modulating chain, stepped once per slot by its owner."""

    alpha: float
    beta: float
    lambda_by_state: tuple[float, float]
    slot_duration_s: float
    state: int = 1

    def __post_init__(self) -> None:
        if self.state not in (1, 2):
            raise ValueError(f"state must be 1 or 2, got {self.state}")
        # exact discretization of the exponential holding times
        self.p_1_to_2 = 1.0 - np.exp(-self.alpha * self.slot_duration_s)
        self.p_2_to_1 = 1.0 - np.exp(-self.beta * self.slot_duration_s)

    @property
    def intensity(self) -> float:
        return self.lambda_by_state[self.state - 1]

    def step(self, rng: np.random.Generator) -> int:
        """Advance one slot; always consumes exactly one uniform draw."""
        u = rng.random()
        if self.state == 1:
            if u < self.p_1_to_2:
                self.state = 2
        else:
            if u < self.p_2_to_1:
                self.state = 1
        return self.state


def init_state_stationary(alpha: float, beta: float, rng: np.random.Generator) -> int:
    """Draw an initial chain state from the stationary distribution."""
    pi1, _ = stationary_probs(alpha, beta)
    return 1 if rng.random() < pi1 else 2


def sample_hrllc_arrivals(chain: MmppChain, beta_dex: float, dxi: float,
                          rng: np.random.Generator) -> int:
    """Poisson arrivals at the chain's current dexterity-adjusted intensity."""
    lam = effective_intensity(chain.intensity, beta_dex, dxi)
    return int(rng.poisson(lam)) if lam > 0 else 0


def sample_embb_arrivals(lam: float, rng: np.random.Generator) -> int:
    if lam < 0:
        raise ValueError("arrival rate must be >= 0")
    return int(rng.poisson(lam)) if lam > 0 else 0


def sample_state_path(chain: MmppChain, n_slots: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized state trajectory over n_slots via geometric holding times.

    Statistically identical to stepping the chain slot by slot (each slot is
    an independent Bernoulli exit trial), but fast enough for 1e6-slot
    occupancy checks.  Uses its own draw pattern, so it does not replay the
    per-slot stream of ``step``.
    """
    out = np.empty(n_slots, dtype=np.int8)
    pos = 0
    state = chain.state
    while pos < n_slots:
        p_exit = chain.p_1_to_2 if state == 1 else chain.p_2_to_1
        if p_exit <= 0:
            out[pos:] = state
            break
        hold = rng.geometric(p_exit)  # slots until (and including) the exit trial
        end = min(pos + hold, n_slots)
        out[pos:end] = state
        pos = end
        state = 2 if state == 1 else 1
    return out


class DexterityProfile:
    """Per-HRLLC-user DXI schedule over a global slot horizon."""

    def __init__(self, cfg: ScenarioConfig, total_slots: int):
        self.cfg = cfg
        self.total_slots = total_slots
        # two-step change points at thirds of the run
        self.step_a = total_slots // 3
        self.step_b = (2 * total_slots) // 3

    def value(self, user: int, slot: int) -> float:
        cfg = self.cfg
        if cfg.dexterity_profile == "constant":
            return cfg.dxi_level
        if cfg.dexterity_profile == "per_user":
            return cfg.dxi_values[user]
        # two_step: low -> high -> low for the stepped user, constant otherwise
        if user != cfg.dxi_step_user:
            return cfg.dxi_level
        return cfg.dxi_high if self.step_a <= slot < self.step_b else cfg.dxi_low

    def vector(self, slot: int) -> np.ndarray:
        return np.array([self.value(u, slot) for u in range(self.cfg.num_hrllc)])
