"""Per-slot closed loop: traffic -> observation -> action -> service ->
queue update -> reward -> learning, with full trace recording.

Slot order is fixed: (1) step the modulating chains and read DXI, (2) sample
arrivals, (3) draw the channel, (4-6) build the context and let the policy
allocate, (7) compute rates and packet service capacities, (8) update queues
and collect per-packet delays, (9) compute the Lyapunov drift, cost,
violation surrogate and reward, (10) dual ascent (per the configured
cadence), (11) the policy learns.  Observations use the previous slot's
rates, drifts and violation signal; this slot's do not exist before the
action.

Episodes reset queues and chains; learned parameters, the dual variable and
any baseline scheduler state persist across episodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import rngstreams as rs
from .agents import A2CAgent, DqnAgent, reward as compute_reward, step_cost
from .channel import all_user_rates, draw_channel, rate_matrix
from .config import ScenarioConfig
from .constraint import DualVariable, surrogate_y
from .queueing import (EMBB, HRLLC, LyapunovState, UserQueue, packet_delays,
                       service_capacity)
from .schedulers import (Policy, ProportionalFairPolicy, RoundRobinPolicy,
                         SchedulerContext)
from .traffic import (DexterityProfile, MmppChain, init_state_stationary,
                      sample_embb_arrivals, sample_hrllc_arrivals)

POLICY_NAMES = ("a2c", "dqn", "rr", "pf")


@dataclass
class SlotState:
    episode: int
    slot: int                     # global slot index
    mmpp_states: np.ndarray       # (n_h,)
    dxi: np.ndarray               # (n_h,)
    arrivals_embb: np.ndarray
    arrivals_hrllc: np.ndarray
    counts: np.ndarray            # (U,) allocated PRBs
    rates: np.ndarray             # (U,) achieved bits/s
    served: np.ndarray            # (U,) packet service capacity
    departures: np.ndarray        # (U,) actual departures
    backlogs_embb: np.ndarray     # after the slot
    backlogs_hrllc: np.ndarray
    drift_embb: float
    drift_hrllc: float
    cost: float
    y_mean: float
    dual: float
    reward: float

    @property
    def drift(self) -> float:
        return self.drift_embb + self.drift_hrllc


@dataclass
class EpisodeRecord:
    episode: int
    slots: list
    episodic_return: float
    hrllc_delays_s: list
    diagnostics: dict = field(default_factory=dict)


def build_policy(name: str, cfg: ScenarioConfig, master_seed: int) -> Policy:
    if name == "a2c":
        return A2CAgent(cfg, rs.stream(master_seed, rs.POLICY))
    if name == "dqn":
        return DqnAgent(cfg, rs.stream(master_seed, rs.POLICY))
    if name == "rr":
        return RoundRobinPolicy()
    if name == "pf":
        return ProportionalFairPolicy(cfg.num_users, cfg.pf_ewma)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")


class Simulation:
    """One world: owns the rng streams, queues, dual and the global clock."""

    def __init__(self, cfg: ScenarioConfig, policy: Policy,
                 master_seed: Optional[int] = None,
                 total_slots: Optional[int] = None,
                 update_dual: bool = True):
        self.cfg = cfg
        self.policy = policy
        seed = cfg.master_seed if master_seed is None else master_seed
        self.seed = seed
        self.rng_hrllc = [rs.stream(seed, rs.TRAFFIC_HRLLC, u)
                          for u in range(cfg.num_hrllc)]
        self.rng_embb = [rs.stream(seed, rs.TRAFFIC_EMBB, u)
                         for u in range(cfg.num_embb)]
        self.rng_channel = rs.stream(seed, rs.CHANNEL)
        self.rng_chain_init = rs.stream(seed, rs.CHAIN_INIT)
        horizon = total_slots if total_slots is not None else \
            cfg.episodes * cfg.slots_per_episode
        self.dex_profile = DexterityProfile(cfg, horizon)
        self.dual = DualVariable(value=0.0, step=cfg.dual_step)
        self.update_dual = update_dual
        self.global_slot = 0
        self._episode = 0

    def _fresh_chains(self) -> list:
        cfg = self.cfg
        chains = []
        for _ in range(cfg.num_hrllc):
            state = init_state_stationary(cfg.mmpp_alpha, cfg.mmpp_beta,
                                          self.rng_chain_init)
            chains.append(MmppChain(alpha=cfg.mmpp_alpha, beta=cfg.mmpp_beta,
                                    lambda_by_state=(cfg.lambda_slow,
                                                     cfg.lambda_burst),
                                    slot_duration_s=cfg.slot_duration_s,
                                    state=state))
        return chains

    def run_episode(self, record: bool = True) -> EpisodeRecord:
        cfg = self.cfg
        n_e, n_h = cfg.num_embb, cfg.num_hrllc
        chains = self._fresh_chains()
        queues_e = [UserQueue(EMBB) for _ in range(n_e)]
        queues_h = [UserQueue(HRLLC) for _ in range(n_h)]
        lyap = LyapunovState()
        prev_rates = np.zeros(cfg.num_users)
        prev_drift_e = prev_drift_h = prev_y = 0.0
        episode = self._episode
        self.policy.begin_episode()
        slots: list[SlotState] = []
        delays: list[float] = []
        ep_return = 0.0
        y_sum = 0.0

        for _ in range(cfg.slots_per_episode):
            t = self.global_slot
            # (1) task state and modulating chains
            for u, chain in enumerate(chains):
                chain.step(self.rng_hrllc[u])
            dxi = self.dex_profile.vector(t)
            # (2) arrivals
            arr_h = np.array([sample_hrllc_arrivals(chains[u], cfg.beta_dex,
                                                    dxi[u], self.rng_hrllc[u])
                              for u in range(n_h)])
            arr_e = np.array([sample_embb_arrivals(cfg.lambda_embb,
                                                   self.rng_embb[u])
                              for u in range(n_e)])
            # (3) channel
            ch = draw_channel(cfg, self.rng_channel)
            # (4-6) context, decision
            ctx = SchedulerContext(
                backlogs_embb=np.array([q.backlog for q in queues_e]),
                backlogs_hrllc=np.array([q.backlog for q in queues_h]),
                arrivals_embb=arr_e, arrivals_hrllc=arr_h,
                gain_sq=ch.gain_sq, rate_matrix=rate_matrix(ch),
                dxi=dxi, slot=t, prev_rates=prev_rates,
                prev_drift_embb=prev_drift_e, prev_drift_hrllc=prev_drift_h,
                prev_y=prev_y)
            alloc = self.policy.allocate(ctx)
            alloc.validate(cfg.num_prbs, cfg.num_users)
            # (7) achieved rates and whole-packet service
            rates = all_user_rates(ch, alloc)
            served = np.empty(cfg.num_users, dtype=int)
            for u in range(cfg.num_users):
                q = queues_e[u] if u < n_e else queues_h[u - n_e]
                raw = rates[u] * cfg.slot_duration_s / cfg.packet_size_bits
                if cfg.carry_fractional_service:
                    raw += q.credit
                    served[u] = int(raw)
                    q.credit = raw - served[u]
                else:
                    served[u] = service_capacity(rates[u], cfg.slot_duration_s,
                                                 cfg.packet_size_bits)
            # (8) queue updates and per-packet delays
            departures = np.zeros(cfg.num_users, dtype=int)
            for u in range(n_e):
                stamps = queues_e[u].update(int(arr_e[u]), int(served[u]), t)
                departures[u] = len(stamps)
            for u in range(n_h):
                stamps = queues_h[u].update(int(arr_h[u]),
                                            int(served[n_e + u]), t)
                departures[n_e + u] = len(stamps)
                delays.extend(packet_delays(stamps, t, cfg.slot_duration_s,
                                            cfg.d_proc_s))
            backlog_e = np.array([q.backlog for q in queues_e])
            backlog_h = np.array([q.backlog for q in queues_h])
            # (9) drift, cost, violation signal, reward
            lyap.advance(backlog_h, backlog_e)
            cost = step_cost(rates[n_e:], rates[:n_e], cfg.eps_cost)
            y_users = [surrogate_y(int(arr_h[u]), int(served[n_e + u]),
                                   cfg.packet_size_bits, cfg.d_max_s,
                                   cfg.d_proc_s, cfg.chi_h,
                                   cfg.surrogate_exp_cap)
                       for u in range(n_h)]
            y_mean = float(np.mean(y_users))
            # The surrogate equals chi_h at arrival/service balance, so the
            # penalty and the dual ascend on the excess over that neutral
            # level: positive only when arrivals genuinely outpace service.
            violation = y_mean - cfg.chi_h
            rew = compute_reward(lyap.drift, cost, cfg.lyapunov_v,
                                 self.dual.value, violation)
            # (10) dual ascent
            if self.update_dual and cfg.dual_cadence == "slot":
                self.dual.update(violation)
            y_sum += violation
            # (11) learning signal
            self.policy.observe_reward(rew)

            ep_return += rew
            if record:
                slots.append(SlotState(
                    episode=episode, slot=t, mmpp_states=np.array(
                        [c.state for c in chains]),
                    dxi=dxi.copy(), arrivals_embb=arr_e, arrivals_hrllc=arr_h,
                    counts=alloc.counts.copy(), rates=rates, served=served,
                    departures=departures, backlogs_embb=backlog_e,
                    backlogs_hrllc=backlog_h, drift_embb=lyap.drift_embb,
                    drift_hrllc=lyap.drift_hrllc, cost=cost, y_mean=y_mean,
                    dual=self.dual.value, reward=rew))
            prev_rates = rates
            prev_drift_e, prev_drift_h = lyap.drift_embb, lyap.drift_hrllc
            prev_y = y_mean
            self.global_slot += 1

        if self.update_dual and cfg.dual_cadence == "episode":
            self.dual.update(y_sum / cfg.slots_per_episode)
        self.policy.end_episode()
        for q in queues_e + queues_h:
            q.audit_conservation()
        self._episode += 1
        diag = dict(getattr(self.policy, "diag", {}))
        diag["dual"] = self.dual.value
        return EpisodeRecord(episode=episode, slots=slots,
                             episodic_return=ep_return,
                             hrllc_delays_s=delays, diagnostics=diag)


def run_training(cfg: ScenarioConfig, agent_kind: str,
                 master_seed: Optional[int] = None
                 ) -> tuple[list[EpisodeRecord], Policy]:
    """Train (or just run, for rr/pf) a policy for cfg.episodes episodes."""
    seed = cfg.master_seed if master_seed is None else master_seed
    policy = build_policy(agent_kind, cfg, seed)
    sim = Simulation(cfg, policy, master_seed=seed)
    records = [sim.run_episode() for _ in range(cfg.episodes)]
    return records, policy


def run_evaluation(cfg: ScenarioConfig, policy: Policy, eval_seed: int,
                   episodes: Optional[int] = None) -> list[EpisodeRecord]:
    """Frozen-policy rollout on a fresh world seeded by eval_seed.

    Traffic and channel streams depend only on (eval_seed, user), so
    different policies evaluated with the same eval_seed face identical
    randomness.
    """
    n_episodes = episodes if episodes is not None else cfg.eval_episodes
    policy.set_training(False)
    sim = Simulation(cfg, policy, master_seed=eval_seed,
                     total_slots=n_episodes * cfg.slots_per_episode,
                     update_dual=False)
    return [sim.run_episode() for _ in range(n_episodes)]


def step_response_summary(records: list[EpisodeRecord], cfg: ScenarioConfig,
                          window_slots: Optional[int] = None) -> dict:
    """Pre/post statistics around the two dexterity change points for the
    stepped user: mean arrivals, PRBs and achieved rate per window."""
    slots = [s for r in records for s in r.slots]
    total = len(slots)
    profile = DexterityProfile(cfg, cfg.episodes * cfg.slots_per_episode)
    user = cfg.dxi_step_user
    col = cfg.num_embb + user
    w = window_slots or max(total // 10, 1)

    def window_stats(lo: int, hi: int) -> dict:
        part = slots[max(lo, 0):min(hi, total)]
        return {
            "mean_arrivals": float(np.mean([s.arrivals_hrllc[user] for s in part])),
            "mean_prbs": float(np.mean([s.counts[col] for s in part])),
            "mean_rate_bps": float(np.mean([s.rates[col] for s in part])),
            "mean_dxi": float(np.mean([s.dxi[user] for s in part])),
        }

    return {
        "step_a_slot": profile.step_a,
        "step_b_slot": profile.step_b,
        "window_slots": w,
        "before_step_a": window_stats(profile.step_a - w, profile.step_a),
        "after_step_a": window_stats(profile.step_a, profile.step_a + w),
        "before_step_b": window_stats(profile.step_b - w, profile.step_b),
        "after_step_b": window_stats(profile.step_b, profile.step_b + w),
    }


# --- CSV export -------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(int(x))


def trace_columns(cfg: ScenarioConfig) -> list[str]:
    cols = ["episode", "slot"]
    cols += [f"G_{i}" for i in range(cfg.num_embb)]
    cols += [f"F_{i}" for i in range(cfg.num_hrllc)]
    cols += [f"a_{i}" for i in range(cfg.num_users)]
    cols += [f"r_{i}" for i in range(cfg.num_users)]
    cols += ["drift_embb", "drift_hrllc", "cost", "y", "dual", "reward"]
    cols += [f"dxi_{i}" for i in range(cfg.num_hrllc)]
    cols += [f"mmpp_{i}" for i in range(cfg.num_hrllc)]
    return cols


def export_trace_csv(records: list[EpisodeRecord], cfg: ScenarioConfig,
                     path: str | Path) -> None:
    """One CSV per run with a stable column order for downstream plotting."""
    lines = [",".join(trace_columns(cfg))]
    for rec in records:
        for s in rec.slots:
            row = [str(s.episode), str(s.slot)]
            row += [_fmt(v) for v in s.backlogs_embb]
            row += [_fmt(v) for v in s.backlogs_hrllc]
            row += [_fmt(v) for v in s.counts]
            row += [_fmt(v) for v in s.rates]
            row += [_fmt(s.drift_embb), _fmt(s.drift_hrllc), _fmt(s.cost),
                    _fmt(s.y_mean), _fmt(s.dual), _fmt(s.reward)]
            row += [_fmt(v) for v in s.dxi]
            row += [_fmt(v) for v in s.mmpp_states]
            lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def diagnostics_columns(agent_kind: str) -> list[str]:
    if agent_kind == "a2c":
        return ["episode", "return", "actor_loss", "critic_loss", "entropy",
                "dual"]
    if agent_kind == "dqn":
        return ["episode", "return", "td_loss", "dual"]
    return ["episode", "return", "dual"]


def export_diagnostics_csv(records: list[EpisodeRecord], agent_kind: str,
                           path: str | Path) -> None:
    cols = diagnostics_columns(agent_kind)
    lines = [",".join(cols)]
    for rec in records:
        d = rec.diagnostics
        n = max(d.get("updates", 0), 1)
        row = [str(rec.episode), _fmt(rec.episodic_return)]
        if agent_kind == "a2c":
            row += [_fmt(d.get("actor_loss", 0.0) / n),
                    _fmt(d.get("critic_loss", 0.0) / n),
                    _fmt(d.get("entropy", 0.0) / n)]
        elif agent_kind == "dqn":
            row += [_fmt(d.get("loss", 0.0) / n)]
        row.append(_fmt(d.get("dual", 0.0)))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
