import numpy as np
import pytest

from slicesched import rngstreams as rs
from slicesched.channel import (ChannelSlot, all_user_rates, draw_channel,
                                prb_rate, rate_matrix, user_rate)
from slicesched.config import ScenarioConfig
from slicesched.schedulers import Allocation


def test_draw_shapes_and_nonnegativity(default_cfg):
    ch = draw_channel(default_cfg, np.random.default_rng(0))
    assert ch.gain_sq.shape == (default_cfg.num_users, default_cfg.num_prbs)
    assert np.all(ch.gain_sq >= 0)


def test_draw_unit_mean_exponential(default_cfg):
    rng = np.random.default_rng(1)
    total, n = 0.0, 0
    for _ in range(6):
        ch = draw_channel(default_cfg, rng)
        total += ch.gain_sq.sum()
        n += ch.gain_sq.size
    big = np.random.default_rng(2).exponential(1.0, size=1_000_000)
    assert big.mean() == pytest.approx(1.0, abs=0.01)
    assert total / n == pytest.approx(1.0, abs=0.1)


def test_draw_deterministic_per_seed(default_cfg):
    a = draw_channel(default_cfg, rs.stream(9, rs.CHANNEL))
    b = draw_channel(default_cfg, rs.stream(9, rs.CHANNEL))
    assert np.array_equal(a.gain_sq, b.gain_sq)


def test_channel_slot_validation():
    with pytest.raises(ValueError):
        ChannelSlot(gain_sq=np.ones(5), mean_snr_linear=10.0,
                    prb_bandwidth_hz=4e5)
    with pytest.raises(ValueError):
        ChannelSlot(gain_sq=np.array([[1.0, -0.1]]), mean_snr_linear=10.0,
                    prb_bandwidth_hz=4e5)
    with pytest.raises(ValueError):
        ChannelSlot(gain_sq=np.array([[np.nan, 1.0]]), mean_snr_linear=10.0,
                    prb_bandwidth_hz=4e5)


def test_prb_rate_reference_points():
    assert prb_rate(1.0, 1.0, 4e5) == pytest.approx(4e5)     # log2(2) = 1
    assert prb_rate(0.0, 10.0, 4e5) == 0.0                   # deep fade
    assert prb_rate(3.0, 1.0, 4e5) == pytest.approx(8e5)     # log2(4) = 2


def test_prb_rate_monotone():
    r0 = prb_rate(1.0, 10.0, 4e5)
    assert prb_rate(2.0, 10.0, 4e5) > r0
    assert prb_rate(1.0, 20.0, 4e5) > r0
    assert prb_rate(1.0, 10.0, 8e5) > r0


def _slot(gain_sq):
    return ChannelSlot(gain_sq=np.asarray(gain_sq, dtype=float),
                       mean_snr_linear=10.0, prb_bandwidth_hz=4e5)


def test_rate_matrix_matches_scalar_rate():
    ch = _slot(np.random.default_rng(3).exponential(1.0, size=(3, 4)))
    mat = rate_matrix(ch)
    for u in range(3):
        for j in range(4):
            assert mat[u, j] == pytest.approx(
                prb_rate(ch.gain_sq[u, j], 10.0, 4e5))


def test_user_rate_empty_and_additive():
    ch = _slot([[1.0, 1.0, 3.0], [0.5, 0.2, 0.1]])
    alloc = Allocation(counts=np.array([3, 0]),
                       assignment=np.array([0, 0, 0]))
    assert user_rate(ch, alloc, 1) == 0.0
    expected = 4e5 * (2 * np.log2(1 + 10.0) + np.log2(1 + 30.0))
    assert user_rate(ch, alloc, 0) == pytest.approx(expected)


def test_total_rate_partition_identity():
    rng = np.random.default_rng(4)
    for _ in range(50):
        gains = rng.exponential(1.0, size=(5, 8))
        ch = _slot(gains)
        assignment = rng.integers(0, 5, size=8)
        counts = np.bincount(assignment, minlength=5)
        alloc = Allocation(counts=counts, assignment=assignment)
        total_by_user = sum(user_rate(ch, alloc, u) for u in range(5))
        mat = rate_matrix(ch)
        total_by_prb = sum(mat[assignment[j], j] for j in range(8))
        assert total_by_user == pytest.approx(total_by_prb)
        assert np.allclose(all_user_rates(ch, alloc),
                           [user_rate(ch, alloc, u) for u in range(5)])
