"""Learning schedulers: observation encoding, the factorized discrete action
space, the drift-plus-penalty reward, and the actor-critic / DQN agents.

Action factorization: one categorical head picks the HRLLC slice size
k_h in {n_h, ..., K - n_e}; the other picks the eMBB intra-slice template
(uniform, backlog-proportional, channel-greedy).  Per-user division inside
each slice is deterministic (largest-remainder by backlog+arrival weight for
HRLLC), which keeps the action space small while letting per-user PRB shares
track task-driven demand.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ScenarioConfig
from .net import Adam, Mlp, clip_grads, load_arrays, save_arrays, softmax, softmax_categorical
from .schedulers import (Allocation, Policy, SchedulerContext,
                         intra_slice_divide, materialize_assignment)

TEMPLATES = ("uniform", "backlog", "channel")


@dataclass(frozen=True)
class ActionSpace:
    kh_options: tuple[int, ...]
    templates: tuple[str, ...] = TEMPLATES

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "ActionSpace":
        return cls(kh_options=tuple(range(cfg.num_hrllc,
                                          cfg.num_prbs - cfg.num_embb + 1)))

    @property
    def n_kh(self) -> int:
        return len(self.kh_options)

    @property
    def n_templates(self) -> int:
        return len(self.templates)

    @property
    def n_joint(self) -> int:
        return self.n_kh * self.n_templates

    def joint_index(self, kh_idx: int, template_idx: int) -> int:
        return kh_idx * self.n_templates + template_idx

    def split_index(self, joint: int) -> tuple[int, int]:
        return divmod(joint, self.n_templates)


def obs_length(cfg: ScenarioConfig) -> int:
    """Feature count: 3 per eMBB user + slice drift, 3 per HRLLC user + slice
    drift + violation signal + one DXI entry per HRLLC user."""
    return 3 * cfg.num_embb + 1 + 3 * cfg.num_hrllc + 1 + 1 + cfg.num_hrllc


def encode_observation(ctx: SchedulerContext, cfg: ScenarioConfig) -> np.ndarray:
    """Normalized feature vector, eMBB block then HRLLC block.

    Queue features include the current slot's arrivals (they are eligible
    for same-slot service, so they are part of the workload the action must
    cover).  Rates, drifts and the violation signal come from the previous
    slot: this slot's do not exist until after the action.
    """
    n_e = cfg.num_embb
    mean_gain = ctx.gain_sq.mean(axis=1)
    r_ref = cfg.r_ref_mbps * 1e6
    feats = np.concatenate([
        (ctx.backlogs_embb + ctx.arrivals_embb) / cfg.q_ref,
        mean_gain[:n_e],
        ctx.prev_rates[:n_e] / r_ref,
        [ctx.prev_drift_embb / cfg.l_ref],
        (ctx.backlogs_hrllc + ctx.arrivals_hrllc) / cfg.q_ref,
        mean_gain[n_e:],
        ctx.prev_rates[n_e:] / r_ref,
        [ctx.prev_drift_hrllc / cfg.l_ref],
        [np.clip(ctx.prev_y, -1.0, cfg.y_clip)],
        ctx.dxi,
    ])
    return np.clip(feats, -cfg.obs_clip, cfg.obs_clip)


def decode_action(space: ActionSpace, kh_idx: int, template_idx: int,
                  ctx: SchedulerContext) -> Allocation:
    """Expand a (slice size, template) pair into a full feasible Allocation."""
    k_h = space.kh_options[kh_idx]
    template = space.templates[template_idx]
    n_e, n_h = ctx.num_embb, ctx.num_hrllc
    counts_h = intra_slice_divide(
        n_h, k_h, ctx.backlogs_hrllc + ctx.arrivals_hrllc)
    if template == "uniform":
        weights_e = np.zeros(n_e)
    elif template == "backlog":
        weights_e = (ctx.backlogs_embb + ctx.arrivals_embb).astype(float)
    elif template == "channel":
        weights_e = ctx.gain_sq[:n_e].mean(axis=1)
    else:
        raise ValueError(f"unknown template {template!r}")
    counts_e = intra_slice_divide(n_e, ctx.num_prbs - k_h, weights_e)
    counts = np.concatenate([counts_e, counts_h])
    assignment = materialize_assignment(counts, ctx.gain_sq)
    return Allocation(counts=counts, assignment=assignment)


def step_cost(rates_hrllc: np.ndarray, rates_embb: np.ndarray, eps: float) -> float:
    """Inverse-square rate cost; rates enter in Mbit/s so the cost has a
    usable dynamic range against the drift term."""
    rh = np.asarray(rates_hrllc, dtype=float) / 1e6
    re = np.asarray(rates_embb, dtype=float) / 1e6
    return float(np.sum(1.0 / (rh * rh + eps)) + np.sum(1.0 / (re * re + eps)))


def reward(drift: float, cost: float, v: float, dual: float, y: float) -> float:
    """Negative drift-plus-penalty with the dual scaling only positive
    violation (penalty sign; see decision notes)."""
    return -(drift + v * cost + dual * max(y, 0.0))


class _NetPack:
    """Actor-critic parameter container: shared trunk or separate nets."""

    def __init__(self, cfg: ScenarioConfig, obs_dim: int, space: ActionSpace,
                 rng: np.random.Generator):
        hidden = list(cfg.trunk_hidden)
        acts = [cfg.trunk_activation] * len(hidden) + ["identity"]
        self.shared = cfg.shared_trunk
        self.n_kh = space.n_kh
        self.n_templates = space.n_templates
        if self.shared:
            out = space.n_kh + space.n_templates + 1
            self.net = Mlp([obs_dim] + hidden + [out], acts, rng)
        else:
            self.actor = Mlp([obs_dim] + hidden + [space.n_kh + space.n_templates],
                             acts, rng)
            self.critic = Mlp([obs_dim] + hidden + [1], acts, rng)

    def heads(self, obs: np.ndarray):
        """(logits_h, logits_e, value, traces) for a single observation."""
        if self.shared:
            out, trace = self.net.forward(obs)
            row = out[0]
            return (row[:self.n_kh], row[self.n_kh:self.n_kh + self.n_templates],
                    float(row[-1]), (trace,))
        a_out, a_trace = self.actor.forward(obs)
        c_out, c_trace = self.critic.forward(obs)
        row = a_out[0]
        return (row[:self.n_kh], row[self.n_kh:], float(c_out[0, 0]),
                (a_trace, c_trace))

    def value(self, obs: np.ndarray) -> float:
        if self.shared:
            out, _ = self.net.forward(obs)
            return float(out[0, -1])
        out, _ = self.critic.forward(obs)
        return float(out[0, 0])

    def arrays(self) -> list[np.ndarray]:
        if self.shared:
            return self.net.params
        return self.actor.params + self.critic.params

    def load(self, arrays: list[np.ndarray]) -> None:
        if self.shared:
            self.net.set_params(arrays)
        else:
            n = len(self.actor.params)
            self.actor.set_params(arrays[:n])
            self.critic.set_params(arrays[n:])


def _entropy_grad(probs: np.ndarray) -> np.ndarray:
    """d(entropy)/d(logits) for a softmax categorical."""
    logp = np.log(probs + 1e-300)
    entropy = -float(np.sum(probs * logp))
    return -probs * (logp + entropy)


def a2c_grads(pack: _NetPack, obs: np.ndarray, actions: tuple[int, int],
              rew: float, next_obs: Optional[np.ndarray], gamma: float,
              entropy_coef: float) -> tuple[list, list, dict]:
    """One-transition actor and critic gradients plus diagnostics.

    The bootstrapped target and the advantage are treated as constants
    (semi-gradient TD); terminal transitions bootstrap with zero.
    """
    logits_h, logits_e, value, traces = pack.heads(obs)
    v_next = pack.value(next_obs) if next_obs is not None else 0.0
    target = rew + gamma * v_next
    delta = target - value

    probs_h = softmax(logits_h)
    probs_e = softmax(logits_e)
    a_h, a_e = actions
    one_h = np.zeros_like(probs_h)
    one_h[a_h] = 1.0
    one_e = np.zeros_like(probs_e)
    one_e[a_e] = 1.0
    # actor loss: -delta*(log pi_h + log pi_e) - beta*(H_h + H_e)
    dl_h = -delta * (one_h - probs_h) - entropy_coef * _entropy_grad(probs_h)
    dl_e = -delta * (one_e - probs_e) - entropy_coef * _entropy_grad(probs_e)
    dvalue = -2.0 * delta  # critic loss: delta^2

    ent_h = -float(np.sum(probs_h * np.log(probs_h + 1e-300)))
    ent_e = -float(np.sum(probs_e * np.log(probs_e + 1e-300)))
    diag = {
        "delta": delta,
        "critic_loss": delta * delta,
        "actor_loss": (-delta * (np.log(probs_h[a_h] + 1e-300)
                                 + np.log(probs_e[a_e] + 1e-300))
                       - entropy_coef * (ent_h + ent_e)),
        "entropy": ent_h + ent_e,
    }

    if pack.shared:
        trace = traces[0]
        dout_actor = np.concatenate([dl_h, dl_e, [0.0]])[None, :]
        dout_critic = np.zeros_like(dout_actor)
        dout_critic[0, -1] = dvalue
        return (pack.net.backward(trace, dout_actor),
                pack.net.backward(trace, dout_critic), diag)
    a_trace, c_trace = traces
    dout_actor = np.concatenate([dl_h, dl_e])[None, :]
    return (pack.actor.backward(a_trace, dout_actor),
            pack.critic.backward(c_trace, np.array([[dvalue]])), diag)


class A2CAgent(Policy):
    """Two-head advantage actor-critic scheduler, updated every slot."""

    name = "a2c"

    def __init__(self, cfg: ScenarioConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.space = ActionSpace.from_config(cfg)
        self.obs_dim = obs_length(cfg)
        self.pack = _NetPack(cfg, self.obs_dim, self.space, rng)
        self.opt_actor = Adam()
        self.opt_critic = Adam()
        self.training = True
        self._pending: Optional[tuple] = None  # (obs, (a_h, a_e), scaled reward)
        self.diag = {"actor_loss": 0.0, "critic_loss": 0.0, "entropy": 0.0,
                     "updates": 0}

    def set_training(self, training: bool) -> None:
        self.training = training
        self._pending = None

    def begin_episode(self) -> None:
        self.diag = {"actor_loss": 0.0, "critic_loss": 0.0, "entropy": 0.0,
                     "updates": 0}

    def allocate(self, ctx: SchedulerContext) -> Allocation:
        obs = encode_observation(ctx, self.cfg)
        if self.training and self._pending is not None:
            self._learn(next_obs=obs, terminal=False)
        logits_h, logits_e, _, _ = self.pack.heads(obs)
        if self.training:
            a_h, _, _ = softmax_categorical(logits_h, self.rng)
            a_e, _, _ = softmax_categorical(logits_e, self.rng)
        else:
            a_h = int(np.argmax(logits_h))
            a_e = int(np.argmax(logits_e))
        self._pending = [obs, (a_h, a_e), 0.0]
        return decode_action(self.space, a_h, a_e, ctx)

    def observe_reward(self, rew: float) -> None:
        if self._pending is not None:
            self._pending[2] = rew * self.cfg.reward_scale

    def end_episode(self) -> None:
        if self.training and self._pending is not None:
            self._learn(next_obs=None, terminal=True)
        self._pending = None

    def _learn(self, next_obs: Optional[np.ndarray], terminal: bool) -> None:
        obs, actions, rew = self._pending
        grads_a, grads_c, diag = a2c_grads(
            self.pack, obs, actions, rew, None if terminal else next_obs,
            self.cfg.gamma, self.cfg.entropy_coef)
        grads_a = clip_grads(grads_a, self.cfg.grad_clip)
        grads_c = clip_grads(grads_c, self.cfg.grad_clip)
        if self.pack.shared:
            params = self.pack.net.params
            params = self.opt_actor.step(params, grads_a, self.cfg.lr_actor)
            params = self.opt_critic.step(params, grads_c, self.cfg.lr_critic)
            self.pack.net.set_params(params)
        else:
            self.pack.actor.set_params(
                self.opt_actor.step(self.pack.actor.params, grads_a,
                                    self.cfg.lr_actor))
            self.pack.critic.set_params(
                self.opt_critic.step(self.pack.critic.params, grads_c,
                                     self.cfg.lr_critic))
        self.diag["actor_loss"] += diag["actor_loss"]
        self.diag["critic_loss"] += diag["critic_loss"]
        self.diag["entropy"] += diag["entropy"]
        self.diag["updates"] += 1

    # --- checkpointing ---
    def save(self, path) -> None:
        meta = {"kind": "a2c", "shared": self.pack.shared,
                "obs_dim": self.obs_dim, "n_kh": self.space.n_kh}
        save_arrays(path, self.pack.arrays(), meta)

    def load(self, path) -> None:
        arrays, meta = load_arrays(path)
        if meta.get("kind") != "a2c":
            raise ValueError(f"checkpoint kind {meta.get('kind')!r} is not 'a2c'")
        if meta.get("obs_dim") != self.obs_dim or meta.get("n_kh") != self.space.n_kh:
            raise ValueError("checkpoint does not match this scenario's shapes")
        self.pack.load(arrays)


class DqnAgent(Policy):
    """Value-based baseline over the flattened joint action index."""

    name = "dqn"

    def __init__(self, cfg: ScenarioConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.space = ActionSpace.from_config(cfg)
        self.obs_dim = obs_length(cfg)
        hidden = list(cfg.trunk_hidden)
        acts = [cfg.trunk_activation] * len(hidden) + ["identity"]
        sizes = [self.obs_dim] + hidden + [self.space.n_joint]
        self.qnet = Mlp(sizes, acts, rng)
        self.target = Mlp(sizes, acts, rng)
        self._sync_target()
        self.opt = Adam()
        self.replay: deque = deque(maxlen=cfg.dqn_replay_capacity)
        self.training = True
        self.steps = 0
        self.updates = 0
        self._pending: Optional[list] = None
        self.diag = {"loss": 0.0, "updates": 0}

    def _sync_target(self) -> None:
        self.target.set_params([p.copy() for p in self.qnet.params])

    @property
    def epsilon(self) -> float:
        cfg = self.cfg
        frac = min(self.steps / cfg.dqn_eps_decay_slots, 1.0)
        return cfg.dqn_eps_start + frac * (cfg.dqn_eps_end - cfg.dqn_eps_start)

    def set_training(self, training: bool) -> None:
        self.training = training
        self._pending = None

    def begin_episode(self) -> None:
        self.diag = {"loss": 0.0, "updates": 0}

    def allocate(self, ctx: SchedulerContext) -> Allocation:
        obs = encode_observation(ctx, self.cfg)
        if self.training and self._pending is not None:
            self._store(next_obs=obs, terminal=False)
        if self.training and self.rng.random() < self.epsilon:
            joint = int(self.rng.integers(self.space.n_joint))
        else:
            q, _ = self.qnet.forward(obs)
            joint = int(np.argmax(q[0]))
        if self.training:
            self.steps += 1
        self._pending = [obs, joint, 0.0]
        kh_idx, t_idx = self.space.split_index(joint)
        return decode_action(self.space, kh_idx, t_idx, ctx)

    def observe_reward(self, rew: float) -> None:
        if self._pending is not None:
            self._pending[2] = rew * self.cfg.reward_scale

    def end_episode(self) -> None:
        if self.training and self._pending is not None:
            self._store(next_obs=None, terminal=True)
        self._pending = None

    def _store(self, next_obs: Optional[np.ndarray], terminal: bool) -> None:
        obs, joint, rew = self._pending
        self.replay.append((obs, joint, rew,
                            next_obs if next_obs is not None else obs, terminal))
        if len(self.replay) >= self.cfg.dqn_batch_size:
            self._update()

    def _update(self) -> None:
        cfg = self.cfg
        idx = self.rng.choice(len(self.replay), size=cfg.dqn_batch_size,
                              replace=False)
        batch = [self.replay[i] for i in idx]
        obs = np.stack([b[0] for b in batch])
        acts = np.array([b[1] for b in batch])
        rews = np.array([b[2] for b in batch])
        nxt = np.stack([b[3] for b in batch])
        done = np.array([b[4] for b in batch], dtype=float)
        q, trace = self.qnet.forward(obs)
        q_next, _ = self.target.forward(nxt)
        targets = rews + cfg.gamma * (1.0 - done) * q_next.max(axis=1)
        chosen = q[np.arange(len(batch)), acts]
        err = chosen - targets
        dout = np.zeros_like(q)
        dout[np.arange(len(batch)), acts] = 2.0 * err / len(batch)
        grads = clip_grads(self.qnet.backward(trace, dout), cfg.grad_clip)
        self.qnet.set_params(self.opt.step(self.qnet.params, grads, cfg.lr_critic))
        self.updates += 1
        self.diag["loss"] += float(np.mean(err * err))
        self.diag["updates"] += 1
        if self.updates % cfg.dqn_target_sync == 0:
            self._sync_target()

    def save(self, path) -> None:
        meta = {"kind": "dqn", "obs_dim": self.obs_dim,
                "n_joint": self.space.n_joint}
        save_arrays(path, self.qnet.params, meta)

    def load(self, path) -> None:
        arrays, meta = load_arrays(path)
        if meta.get("kind") != "dqn":
            raise ValueError(f"checkpoint kind {meta.get('kind')!r} is not 'dqn'")
        if meta.get("obs_dim") != self.obs_dim or meta.get("n_joint") != self.space.n_joint:
            raise ValueError("checkpoint does not match this scenario's shapes")
        self.qnet.set_params(arrays)
        self._sync_target()
