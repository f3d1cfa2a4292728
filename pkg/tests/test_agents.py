import numpy as np
import pytest

from slicesched.agents import (A2CAgent, ActionSpace, DqnAgent, _NetPack,
                               a2c_grads, decode_action, encode_observation,
                               obs_length, reward, step_cost)
from slicesched.config import ScenarioConfig
from slicesched.net import softmax
from conftest import make_context


def test_action_space_defaults():
    space = ActionSpace.from_config(ScenarioConfig())
    assert space.kh_options == tuple(range(3, 22))
    assert space.n_kh == 19
    assert space.n_templates == 3
    assert space.n_joint == 57


def test_action_space_index_round_trip():
    space = ActionSpace.from_config(ScenarioConfig())
    for joint in range(space.n_joint):
        kh, t = space.split_index(joint)
        assert space.joint_index(kh, t) == joint


def test_obs_length_formula():
    cfg = ScenarioConfig()
    # 3 per eMBB user + slice drift + 3 per HRLLC user + slice drift
    # + violation signal + one DXI entry per HRLLC user
    assert obs_length(cfg) == 3 * 4 + 1 + 3 * 3 + 1 + 1 + 3 == 27
    small = cfg.replace(num_embb=2, num_hrllc=2, num_prbs=10)
    assert obs_length(small) == 6 + 1 + 6 + 1 + 1 + 2


def _empty_context(cfg):
    ctx = make_context(np.random.default_rng(0), cfg.num_embb, cfg.num_hrllc,
                       cfg.num_prbs)
    ctx.backlogs_embb = np.zeros(cfg.num_embb, dtype=int)
    ctx.backlogs_hrllc = np.zeros(cfg.num_hrllc, dtype=int)
    ctx.arrivals_embb = np.zeros(cfg.num_embb, dtype=int)
    ctx.arrivals_hrllc = np.zeros(cfg.num_hrllc, dtype=int)
    ctx.gain_sq = np.zeros((cfg.num_users, cfg.num_prbs))
    ctx.prev_rates = np.zeros(cfg.num_users)
    ctx.prev_drift_embb = ctx.prev_drift_hrllc = ctx.prev_y = 0.0
    ctx.dxi = np.array([1.0, 2.0, 3.0])
    return ctx


def test_encode_empty_system_is_zero_except_dxi():
    cfg = ScenarioConfig()
    obs = encode_observation(_empty_context(cfg), cfg)
    assert obs.shape == (obs_length(cfg),)
    assert np.array_equal(obs[-cfg.num_hrllc:], [1.0, 2.0, 3.0])
    assert np.all(obs[:-cfg.num_hrllc] == 0.0)


def test_encode_queue_features_scale_linearly():
    cfg = ScenarioConfig()
    ctx = _empty_context(cfg)
    ctx.backlogs_embb = np.array([10, 0, 0, 0])
    one = encode_observation(ctx, cfg)
    ctx.backlogs_embb = np.array([20, 0, 0, 0])
    two = encode_observation(ctx, cfg)
    assert two[0] == pytest.approx(2 * one[0])


def test_encode_clips_extremes():
    cfg = ScenarioConfig()
    ctx = _empty_context(ctx_cfg := cfg)
    ctx.backlogs_embb = np.array([10**9, 0, 0, 0])
    ctx.prev_drift_hrllc = -1e12
    obs = encode_observation(ctx, ctx_cfg)
    assert obs.max() <= cfg.obs_clip and obs.min() >= -cfg.obs_clip


def test_decode_action_extreme_slices():
    cfg = ScenarioConfig()
    space = ActionSpace.from_config(cfg)
    ctx = make_context(np.random.default_rng(1))
    low = decode_action(space, 0, 0, ctx)            # k_h = 3
    assert low.counts[cfg.num_embb:].tolist() == [1, 1, 1]
    high = decode_action(space, space.n_kh - 1, 0, ctx)  # k_h = 21
    assert high.counts[:cfg.num_embb].tolist() == [1, 1, 1, 1]


def test_decode_action_exhaustive_feasibility():
    cfg = ScenarioConfig()
    space = ActionSpace.from_config(cfg)
    rng = np.random.default_rng(2)
    for trial in range(5):
        ctx = make_context(rng)
        for kh_idx in range(space.n_kh):
            for t_idx in range(space.n_templates):
                alloc = decode_action(space, kh_idx, t_idx, ctx)
                alloc.validate(cfg.num_prbs, cfg.num_users)
                assert alloc.counts[cfg.num_embb:].sum() == \
                    space.kh_options[kh_idx]


def test_step_cost_reference():
    assert step_cost([1e6], [2e6], eps=1e-12) == pytest.approx(1.25, rel=1e-6)
    assert step_cost([0.0], [0.0], eps=1e-6) == pytest.approx(2e6)


def test_step_cost_monotone():
    rng = np.random.default_rng(3)
    for _ in range(100):
        r = rng.uniform(0.5e6, 5e6, 4)
        base = step_cost(r[:2], r[2:], 1e-6)
        bumped = r.copy()
        bumped[1] *= 1.5
        assert step_cost(bumped[:2], bumped[2:], 1e-6) < base


def test_reward_reference():
    assert reward(-4.5, 1.25, 1.0, 0.0, 0.5) == pytest.approx(3.25)
    # inactive constraint: negative violation contributes nothing
    assert reward(1.0, 2.0, 1.0, 5.0, -0.3) == pytest.approx(-3.0)
    # growing dual with positive violation strictly decreases the reward
    assert reward(0.0, 0.0, 1.0, 2.0, 0.5) < reward(0.0, 0.0, 1.0, 1.0, 0.5)


def test_reward_translation_consistent():
    base = reward(1.0, 2.0, 3.0, 0.5, 0.1)
    assert reward(1.0 + 7.0, 2.0, 3.0, 0.5, 0.1) == pytest.approx(base - 7.0)


def _pack(cfg, obs_dim=6):
    small = cfg.replace(num_embb=1, num_hrllc=1, num_prbs=4,
                        trunk_hidden=(8,))
    space = ActionSpace.from_config(small)
    rng = np.random.default_rng(4)
    return small, space, _NetPack(small, obs_dim, space, rng)


@pytest.mark.parametrize("shared", [True, False])
def test_a2c_gradients_match_finite_differences(shared):
    """Composite actor+critic gradients against central differences with the
    bootstrapped target and advantage held constant (semi-gradient)."""
    cfg = ScenarioConfig().replace(num_embb=1, num_hrllc=1, num_prbs=4,
                                   trunk_hidden=(6,), shared_trunk=shared)
    space = ActionSpace.from_config(cfg)
    obs_dim = 5
    rng = np.random.default_rng(5)
    pack = _NetPack(cfg, obs_dim, space, rng)
    obs = rng.normal(size=obs_dim)
    next_obs = rng.normal(size=obs_dim)
    actions = (1, 2)
    rew, gamma, beta = 0.7, 0.99, 0.01

    logits_h, logits_e, value, _ = pack.heads(obs)
    delta = rew + gamma * pack.value(next_obs) - value
    target = rew + gamma * pack.value(next_obs)

    def nets(which):
        if pack.shared:
            return [pack.net]
        return [pack.actor] if which == "actor" else [pack.critic]

    def actor_loss():
        lh, le, _, _ = pack.heads(obs)
        ph, pe = softmax(lh), softmax(le)
        ent = (-np.sum(ph * np.log(ph + 1e-300))
               - np.sum(pe * np.log(pe + 1e-300)))
        return float(-delta * (np.log(ph[actions[0]] + 1e-300)
                               + np.log(pe[actions[1]] + 1e-300))
                     - beta * ent)

    def critic_loss():
        d = target - pack.value(obs)
        return float(d * d)

    grads_a, grads_c, diag = a2c_grads(pack, obs, actions, rew, next_obs,
                                       gamma, beta)
    assert diag["delta"] == pytest.approx(delta)

    step = 1e-6
    for which, scalar_loss, analytic in (("actor", actor_loss, grads_a),
                                         ("critic", critic_loss, grads_c)):
        flat_analytic = np.concatenate([g.ravel() for g in analytic])
        numeric = []
        for net in nets(which):
            for arr in net.params:
                g = np.zeros_like(arr)
                it = np.nditer(arr, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + step
                    hi = scalar_loss()
                    arr[idx] = orig - step
                    lo = scalar_loss()
                    arr[idx] = orig
                    g[idx] = (hi - lo) / (2 * step)
                    it.iternext()
                numeric.append(g)
        flat_numeric = np.concatenate([g.ravel() for g in numeric])
        denom = np.maximum(np.abs(flat_numeric), 1e-5)
        assert np.max(np.abs(flat_analytic - flat_numeric) / denom) < 1e-3


def test_a2c_grads_terminal_delta():
    cfg = ScenarioConfig().replace(num_embb=1, num_hrllc=1, num_prbs=4,
                                   trunk_hidden=(6,))
    space = ActionSpace.from_config(cfg)
    pack = _NetPack(cfg, 5, space, np.random.default_rng(6))
    if pack.shared:
        pack.net.set_params([np.zeros_like(p) for p in pack.net.params])
    _, _, diag = a2c_grads(pack, np.zeros(5), (0, 0), 1.0, None, 0.99, 0.0)
    assert diag["delta"] == pytest.approx(1.0)   # V(s)=0, terminal bootstrap 0


def test_a2c_agent_eval_mode_is_deterministic():
    cfg = ScenarioConfig()
    agent = A2CAgent(cfg, np.random.default_rng(7))
    agent.set_training(False)
    ctx = make_context(np.random.default_rng(8))
    a = agent.allocate(ctx)
    b = agent.allocate(ctx)
    assert np.array_equal(a.counts, b.counts)


def test_a2c_checkpoint_round_trip(tmp_path):
    cfg = ScenarioConfig()
    agent = A2CAgent(cfg, np.random.default_rng(9))
    path = tmp_path / "a2c.bin"
    agent.save(path)
    other = A2CAgent(cfg, np.random.default_rng(10))
    other.load(path)
    for a, b in zip(agent.pack.arrays(), other.pack.arrays()):
        assert np.array_equal(a, b)


def test_a2c_checkpoint_scenario_mismatch(tmp_path):
    agent = A2CAgent(ScenarioConfig(), np.random.default_rng(11))
    path = tmp_path / "a2c.bin"
    agent.save(path)
    smaller = ScenarioConfig().replace(num_embb=2)
    with pytest.raises(ValueError, match="scenario"):
        A2CAgent(smaller, np.random.default_rng(12)).load(path)


def test_dqn_checkpoint_kind_mismatch(tmp_path):
    cfg = ScenarioConfig()
    a2c = A2CAgent(cfg, np.random.default_rng(13))
    path = tmp_path / "a2c.bin"
    a2c.save(path)
    with pytest.raises(ValueError, match="dqn"):
        DqnAgent(cfg, np.random.default_rng(14)).load(path)


def test_dqn_epsilon_schedule():
    cfg = ScenarioConfig()
    agent = DqnAgent(cfg, np.random.default_rng(15))
    assert agent.epsilon == pytest.approx(cfg.dqn_eps_start)
    agent.steps = cfg.dqn_eps_decay_slots
    assert agent.epsilon == pytest.approx(cfg.dqn_eps_end)
    agent.steps = cfg.dqn_eps_decay_slots * 10
    assert agent.epsilon == pytest.approx(cfg.dqn_eps_end)
    agent.steps = cfg.dqn_eps_decay_slots // 2
    assert agent.epsilon == pytest.approx(
        (cfg.dqn_eps_start + cfg.dqn_eps_end) / 2)


def test_dqn_greedy_action_follows_q_values():
    cfg = ScenarioConfig()
    agent = DqnAgent(cfg, np.random.default_rng(16))
    agent.set_training(False)    # epsilon path disabled
    # bias the last layer so one joint action dominates
    params = [np.zeros_like(p) for p in agent.qnet.params]
    joint = 17
    params[-1][joint] = 100.0
    agent.qnet.set_params(params)
    ctx = make_context(np.random.default_rng(17))
    alloc = agent.allocate(ctx)
    kh_idx, t_idx = agent.space.split_index(joint)
    expected = agent.space.kh_options[kh_idx]
    assert alloc.counts[cfg.num_embb:].sum() == expected
