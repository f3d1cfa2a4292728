import time

import numpy as np
import pytest

from slicesched.net import (Adam, Mlp, clip_grads, load_arrays, save_arrays,
                            softmax, softmax_categorical)


def _flat(arrays):
    return np.concatenate([a.ravel() for a in arrays])


def _numeric_grad(net, x, loss_of_output, step=1e-5):
    """Central finite differences of loss(net(x)) over every parameter."""
    grads = []
    for arr in net.params:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            hi = loss_of_output(net.forward(x)[0])
            arr[idx] = orig - step
            lo = loss_of_output(net.forward(x)[0])
            arr[idx] = orig
            g[idx] = (hi - lo) / (2 * step)
            it.iternext()
        grads.append(g)
    return grads


def test_forward_zero_parameters():
    net = Mlp([3, 4, 2], ["tanh", "identity"])
    net.set_params([np.zeros_like(p) for p in net.params])
    out, _ = net.forward(np.array([1.0, -2.0, 3.0]))
    assert np.array_equal(out, np.zeros((1, 2)))


def test_forward_identity_linear_layer():
    net = Mlp([2, 2], ["identity"])
    net.set_params([np.eye(2), np.zeros(2)])
    out, _ = net.forward(np.array([0.3, -0.7]))
    assert np.allclose(out, [[0.3, -0.7]])


def test_forward_rejects_bad_width():
    net = Mlp([3, 2], ["identity"])
    with pytest.raises(ValueError):
        net.forward(np.ones(4))


def test_set_params_shape_check():
    net = Mlp([3, 2], ["identity"])
    with pytest.raises(ValueError):
        net.set_params([np.ones((2, 3)), np.zeros(2)])


def test_backward_zero_output_gradient():
    net = Mlp([3, 4, 2], ["relu", "identity"], np.random.default_rng(0))
    out, trace = net.forward(np.ones(3))
    grads = net.backward(trace, np.zeros_like(out))
    assert all(np.all(g == 0) for g in grads)


def test_backward_single_linear_neuron():
    net = Mlp([3, 1], ["identity"])
    net.set_params([np.array([[2.0], [3.0], [4.0]]), np.zeros(1)])
    x = np.array([0.5, -1.0, 2.0])
    _, trace = net.forward(x)
    grads = net.backward(trace, np.array([[1.0]]))
    assert np.allclose(grads[0].ravel(), x)      # dy/dw = x
    assert np.allclose(grads[1], [1.0])          # dy/db = 1


def test_gradients_match_finite_differences():
    """Analytic backprop vs central differences on many random small nets."""
    rng = np.random.default_rng(42)
    t0 = time.time()
    worst = 0.0
    for trial in range(24):
        act = ["tanh", "relu"][trial % 2]
        sizes = [int(rng.integers(2, 5)) for _ in range(3)] + [3]
        net = Mlp(sizes, [act] * (len(sizes) - 2) + ["identity"], rng)
        # keep pre-activations away from the relu kink so the central
        # difference stays on one side of it
        while True:
            x = rng.normal(size=(2, sizes[0]))
            _, probe = net.forward(x)
            if act != "relu" or all(np.min(np.abs(z)) > 1e-3
                                    for z in probe.pre[:-1]):
                break
        w = rng.normal(size=3)

        def loss_of_output(out):
            return float(np.sum(np.tanh(out) @ w))

        out, trace = net.forward(x)
        dout = (1.0 - np.tanh(out) ** 2) * w
        analytic = _flat(net.backward(trace, dout))
        numeric = _flat(_numeric_grad(net, x, loss_of_output))
        denom = np.maximum(np.abs(numeric), 1e-6)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    assert worst < 1e-4
    assert time.time() - t0 < 10.0


def test_softmax_uniform_and_shift_invariance():
    assert np.allclose(softmax(np.zeros(5)), np.full(5, 0.2))
    logits = np.random.default_rng(0).normal(size=7)
    assert np.allclose(softmax(logits), softmax(logits + 123.4))
    assert softmax(logits).sum() == pytest.approx(1.0, abs=1e-12)


def test_softmax_dominant_logit():
    probs = softmax(np.array([50.0, 0.0, 0.0]))
    assert probs[0] > 0.999999


def test_categorical_sampling_frequencies():
    rng = np.random.default_rng(1)
    logits = np.array([0.0, 1.0, 2.0])
    expected = softmax(logits)
    counts = np.zeros(3)
    n = 100_000
    for _ in range(n):
        idx, logp, probs = softmax_categorical(logits, rng)
        counts[idx] += 1
    assert np.allclose(probs, expected)
    assert np.all(np.abs(counts / n - expected) < 0.01)


def test_categorical_rejects_nonfinite():
    with pytest.raises(ValueError):
        softmax_categorical(np.array([np.inf, 0.0]), np.random.default_rng(0))


def test_categorical_log_probability():
    idx, logp, probs = softmax_categorical(np.array([0.0, 2.0]),
                                           np.random.default_rng(2))
    assert logp == pytest.approx(np.log(probs[idx]))


def test_clip_grads():
    grads = [np.array([3.0]), np.array([4.0])]      # global norm 5
    same = clip_grads(grads, 10.0)
    assert same[0][0] == 3.0
    clipped = clip_grads(grads, 1.0)
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in clipped))
    assert norm == pytest.approx(1.0)


def test_adam_zero_gradient_is_noop():
    opt = Adam()
    params = [np.array([1.0, 2.0])]
    out = opt.step(params, [np.zeros(2)], lr=0.1)
    assert np.allclose(out[0], params[0])


def test_adam_first_step_magnitude():
    # With bias correction the very first step has magnitude ~ lr.
    opt = Adam()
    out = opt.step([np.array([0.0])], [np.array([3.7])], lr=0.01)
    assert abs(out[0][0]) == pytest.approx(0.01, rel=1e-6)


def test_adam_rejects_nonfinite_gradient():
    with pytest.raises(FloatingPointError):
        Adam().step([np.zeros(1)], [np.array([np.nan])], lr=0.1)


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(3)
        opt = Adam()
        params = [rng.normal(size=(2, 2))]
        for _ in range(50):
            params = opt.step(params, [rng.normal(size=(2, 2))], lr=1e-3)
        return params[0]
    assert np.array_equal(run(), run())


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    arrays = [rng.normal(size=(3, 5)), rng.normal(size=5), np.array(2.5)]
    meta = {"kind": "test", "n": 3}
    path = tmp_path / "ckpt.bin"
    save_arrays(path, arrays, meta)
    loaded, got_meta = load_arrays(path)
    assert got_meta == meta
    for a, b in zip(arrays, loaded):
        assert a.shape == b.shape
        assert a.tobytes() == b.tobytes()      # bit-exact


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_arrays(path)


def test_checkpoint_corruption_detected(tmp_path):
    path = tmp_path / "ckpt.bin"
    save_arrays(path, [np.ones(4)], {})
    blob = bytearray(path.read_bytes())
    blob[12] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="checksum"):
        load_arrays(path)
