"""Allocation contract plus the Round-Robin / Proportional-Fair baselines.

Every scheduling decision is an ``Allocation``: an integer PRB count per
user summing exactly to K, with every user holding at least one PRB, and a
materialized PRB -> user assignment consistent with the counts.  All ties
anywhere are broken by the lowest index so seed replays are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Allocation:
    counts: np.ndarray       # (U,) integer PRBs per user, each >= 1, sums to K
    assignment: np.ndarray   # (K,) user index owning each PRB

    def validate(self, num_prbs: int, num_users: int) -> None:
        if self.counts.shape != (num_users,):
            raise AssertionError("counts has wrong shape")
        if self.assignment.shape != (num_prbs,):
            raise AssertionError("assignment has wrong shape")
        if int(self.counts.sum()) != num_prbs:
            raise AssertionError(f"counts sum {self.counts.sum()} != K={num_prbs}")
        if np.any(self.counts < 1):
            raise AssertionError("every user must hold at least one PRB")
        realized = np.bincount(self.assignment, minlength=num_users)
        if not np.array_equal(realized, self.counts):
            raise AssertionError("assignment inconsistent with counts")


@dataclass
class SchedulerContext:
    """Uniform input surface: every policy sees identical information."""

    backlogs_embb: np.ndarray      # (n_e,) packets at slot start
    backlogs_hrllc: np.ndarray     # (n_h,)
    arrivals_embb: np.ndarray      # (n_e,) this slot's arrivals
    arrivals_hrllc: np.ndarray     # (n_h,)
    gain_sq: np.ndarray            # (U, K); rows 0..n_e-1 eMBB, then HRLLC
    rate_matrix: np.ndarray        # (U, K) achievable bits/s per PRB
    dxi: np.ndarray                # (n_h,)
    slot: int
    prev_rates: np.ndarray         # (U,) previous-slot achieved bits/s
    prev_drift_embb: float
    prev_drift_hrllc: float
    prev_y: float
    ewma: Optional[np.ndarray] = None  # filled by the PF policy before dispatch

    @property
    def num_embb(self) -> int:
        return len(self.backlogs_embb)

    @property
    def num_hrllc(self) -> int:
        return len(self.backlogs_hrllc)

    @property
    def num_users(self) -> int:
        return self.gain_sq.shape[0]

    @property
    def num_prbs(self) -> int:
        return self.gain_sq.shape[1]


def round_robin(ctx: SchedulerContext, cursor: int) -> tuple[Allocation, int]:
    """Deal PRBs cyclically from the cursor; counts differ by at most one.

    Channel-agnostic by construction.  Returns the allocation and the
    advanced cursor for the next slot.
    """
    num_users, num_prbs = ctx.num_users, ctx.num_prbs
    assignment = np.array([(cursor + j) % num_users for j in range(num_prbs)])
    counts = np.bincount(assignment, minlength=num_users)
    return (Allocation(counts=counts, assignment=assignment),
            (cursor + num_prbs) % num_users)


def proportional_fair(ctx: SchedulerContext) -> Allocation:
    """Greedy per-PRB argmax of rate/ewma with a >=1-PRB feasibility repair.

    Repair moves the donor's worst-gain PRB from the currently most-loaded
    user to each empty user.
    """
    if ctx.ewma is None or np.any(ctx.ewma <= 0):
        raise ValueError("EWMA throughputs must be initialized > 0")
    num_users, num_prbs = ctx.num_users, ctx.num_prbs
    metric = ctx.rate_matrix / ctx.ewma[:, None]
    assignment = np.empty(num_prbs, dtype=int)
    for j in range(num_prbs):
        assignment[j] = int(np.argmax(metric[:, j]))  # argmax takes lowest index on ties
    counts = np.bincount(assignment, minlength=num_users)
    for user in range(num_users):
        while counts[user] == 0:
            donor = int(np.argmax(counts))
            donor_prbs = np.flatnonzero(assignment == donor)
            worst = donor_prbs[int(np.argmin(ctx.rate_matrix[donor, donor_prbs]))]
            assignment[worst] = user
            counts[donor] -= 1
            counts[user] += 1
    return Allocation(counts=counts, assignment=assignment)


def intra_slice_divide(num_users: int, slice_prbs: int, weights: np.ndarray) -> np.ndarray:
    """One PRB each, then largest-remainder apportionment of the rest by weight.

    All-zero weights degrade to a uniform split with remainders going to the
    lowest indices.
    """
    if slice_prbs < num_users:
        raise ValueError(f"slice needs >= {num_users} PRBs, got {slice_prbs}")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (num_users,) or np.any(weights < 0):
        raise ValueError("weights must be non-negative, one per user")
    counts = np.ones(num_users, dtype=int)
    extra = slice_prbs - num_users
    if extra == 0:
        return counts
    total = weights.sum()
    shares = (np.full(num_users, 1.0 / num_users) if total == 0
              else weights / total)
    quota = shares * extra
    base = np.floor(quota).astype(int)
    counts += base
    remainder = extra - int(base.sum())
    if remainder > 0:
        frac = quota - base
        # largest remainder first; ties to the lowest index (stable mergesort)
        order = np.argsort(-frac, kind="stable")
        counts[order[:remainder]] += 1
    return counts


def materialize_assignment(counts: np.ndarray, gain_sq: np.ndarray) -> np.ndarray:
    """Turn per-user counts into a PRB -> user map.

    Users draft PRBs one at a time in descending remaining-count order
    (ties: lowest index), each picking its personally best unassigned PRB
    (gain ties: lowest PRB index).
    """
    num_users, num_prbs = gain_sq.shape
    if int(np.sum(counts)) != num_prbs:
        raise ValueError("counts must sum to the PRB grid size")
    remaining = np.asarray(counts, dtype=int).copy()
    taken = np.zeros(num_prbs, dtype=bool)
    assignment = np.full(num_prbs, -1, dtype=int)
    # draft order: repeat rounds over users sorted by remaining count
    while remaining.sum() > 0:
        order = np.argsort(-remaining, kind="stable")
        for user in order:
            if remaining[user] == 0:
                continue
            gains = np.where(taken, -np.inf, gain_sq[user])
            best = int(np.argmax(gains))
            assignment[best] = user
            taken[best] = True
            remaining[user] -= 1
    return assignment


class Policy:
    """Common hook surface; learning agents override the learning hooks."""

    name = "policy"

    def allocate(self, ctx: SchedulerContext) -> Allocation:
        raise NotImplementedError

    def begin_episode(self) -> None:
        pass

    def observe_reward(self, reward: float) -> None:
        pass

    def end_episode(self) -> None:
        pass

    def set_training(self, training: bool) -> None:
        pass


class RoundRobinPolicy(Policy):
    """Channel-agnostic cyclic sharing with a persistent cursor."""

    name = "rr"

    def __init__(self) -> None:
        self.cursor = 0

    def allocate(self, ctx: SchedulerContext) -> Allocation:
        alloc, self.cursor = round_robin(ctx, self.cursor)
        return alloc


class ProportionalFairPolicy(Policy):
    """PF priority rule over all users with an EWMA throughput tracker."""

    name = "pf"

    def __init__(self, num_users: int, ewma_factor: float = 0.1) -> None:
        self.ewma_factor = ewma_factor
        self.ewma = np.full(num_users, 1.0)  # 1 bit/s floor avoids div by zero

    def allocate(self, ctx: SchedulerContext) -> Allocation:
        ctx.ewma = self.ewma
        alloc = proportional_fair(ctx)
        achieved = np.zeros(ctx.num_users)
        for j, u in enumerate(alloc.assignment):
            achieved[u] += ctx.rate_matrix[u, j]
        self.ewma = (1.0 - self.ewma_factor) * self.ewma + self.ewma_factor * achieved
        np.maximum(self.ewma, 1.0, out=self.ewma)
        return alloc
