"""Classical stack: forward examples and finite-difference gradient checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnav import nn


# ---------------------------------------------------------------------------
# dense


def test_dense_identity():
    params = {"W": np.eye(3), "b": np.zeros(3)}
    x = np.array([1.0, -2.0, 0.5])
    y, _ = nn.dense_forward(params, x)
    np.testing.assert_array_equal(y, x)


def test_dense_bias_only():
    params = {"W": np.zeros((2, 3)), "b": np.array([4.0, -1.0])}
    y, _ = nn.dense_forward(params, np.ones(3))
    np.testing.assert_array_equal(y, [4.0, -1.0])


def test_dense_2x2_example():
    params = {"W": np.array([[1.0, 2.0], [3.0, 4.0]]), "b": np.zeros(2)}
    y, _ = nn.dense_forward(params, np.array([1.0, 1.0]))
    np.testing.assert_array_equal(y, [3.0, 7.0])


def test_dense_shape_error():
    params = {"W": np.eye(3), "b": np.zeros(3)}
    with pytest.raises(nn.ShapeError):
        nn.dense_forward(params, np.zeros(4))


def test_dense_gradients():
    rng = np.random.default_rng(1)
    params = nn.dense_init(rng, 5, 3)
    x = rng.normal(size=5)
    dy = rng.normal(size=3)

    def loss():
        y, _ = nn.dense_forward(params, x)
        return float(dy @ y)

    _, cache = nn.dense_forward(params, x)
    _, grads = nn.dense_backward(params, dy, cache)
    assert nn.finite_diff_check(params, loss, grads) < 1e-9  # linear: exact


# ---------------------------------------------------------------------------
# layer norm


def test_layer_norm_constant_input_gives_bias():
    params = {"gain": np.ones(4), "bias": np.array([1.0, 2.0, 3.0, 4.0])}
    y, _ = nn.layer_norm_forward(params, np.full(4, 7.0))
    np.testing.assert_allclose(y, params["bias"], atol=1e-6)


def test_layer_norm_standardizes():
    params = nn.layer_norm_init(6)
    y, _ = nn.layer_norm_forward(params, np.array([3.0, -1.0, 2.0, 0.5, 9.0, -4.0]))
    assert abs(y.mean()) < 1e-12
    assert y.var() == pytest.approx(1.0, abs=1e-4)


def test_layer_norm_two_point_example():
    params = nn.layer_norm_init(2)
    y, _ = nn.layer_norm_forward(params, np.array([1.0, -1.0]))
    np.testing.assert_allclose(y, [1.0, -1.0], atol=1e-4)


def test_layer_norm_gradients():
    rng = np.random.default_rng(2)
    params = nn.layer_norm_init(5)
    params["gain"] = rng.normal(size=5)
    params["bias"] = rng.normal(size=5)
    x = rng.normal(size=5)
    dy = rng.normal(size=5)

    def loss():
        y, _ = nn.layer_norm_forward(params, x)
        return float(dy @ y)

    _, cache = nn.layer_norm_forward(params, x)
    dx, grads = nn.layer_norm_backward(params, dy, cache)
    assert nn.finite_diff_check(params, loss, grads) < 1e-5
    # input gradient via a wrapper parameter
    xp = {"x": x}

    def loss_x():
        y, _ = nn.layer_norm_forward(params, xp["x"])
        return float(dy @ y)

    assert nn.finite_diff_check(xp, loss_x, {"x": dx}) < 1e-5


# ---------------------------------------------------------------------------
# softmax / entropy


def test_softmax_uniform():
    probs, entropy = nn.softmax_entropy(np.zeros(3))
    np.testing.assert_allclose(probs, np.full(3, 1 / 3), atol=1e-12)
    assert entropy == pytest.approx(math.log(3), abs=1e-12)


def test_softmax_degenerate():
    _, entropy = nn.softmax_entropy(np.array([50.0, 0.0, 0.0]))
    assert entropy < 1e-10


def test_softmax_two_logits():
    probs, entropy = nn.softmax_entropy(np.zeros(2))
    np.testing.assert_allclose(probs, [0.5, 0.5], atol=1e-12)
    assert entropy == pytest.approx(math.log(2), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=8))
def test_softmax_properties(logits):
    probs, entropy = nn.softmax_entropy(np.array(logits))
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(probs > 0)
    assert -1e-12 <= entropy <= math.log(len(logits)) + 1e-12


def test_entropy_backward_matches_fd():
    rng = np.random.default_rng(3)
    logits = {"z": rng.normal(size=4)}

    def loss():
        _, ent = nn.softmax_entropy(logits["z"])
        return ent

    probs, _ = nn.softmax_entropy(logits["z"])
    grad = nn.entropy_backward(probs, 1.0)
    assert nn.finite_diff_check(logits, loss, {"z": grad}) < 1e-7


# ---------------------------------------------------------------------------
# LSTM


def test_lstm_zero_weights_zero_output():
    params = {"Wx": np.zeros((8, 3)), "Wh": np.zeros((8, 2)), "b": np.zeros(8)}
    h, c, _ = nn.lstm_step(params, np.ones(3), np.zeros(2), np.zeros(2))
    np.testing.assert_array_equal(h, np.zeros(2))
    np.testing.assert_array_equal(c, np.zeros(2))


def test_lstm_outputs_bounded():
    rng = np.random.default_rng(4)
    params = nn.lstm_init(rng, 6, 5)
    h = np.zeros(5)
    c = np.zeros(5)
    for _ in range(20):
        h, c, _ = nn.lstm_step(params, rng.normal(size=6) * 3, h, c)
        assert np.all(np.abs(h) < 1.0)


def test_lstm_shape_error():
    params = nn.lstm_init(np.random.default_rng(0), 6, 5)
    with pytest.raises(nn.ShapeError):
        nn.lstm_step(params, np.zeros(7), np.zeros(5), np.zeros(5))


def test_lstm_gradients():
    rng = np.random.default_rng(5)
    params = nn.lstm_init(rng, 4, 3)
    x = rng.normal(size=4)
    h0 = rng.normal(size=3)
    c0 = rng.normal(size=3)
    dh = rng.normal(size=3)
    dc = rng.normal(size=3)

    def loss():
        h, c, _ = nn.lstm_step(params, x, h0, c0)
        return float(dh @ h + dc @ c)

    _, _, cache = nn.lstm_step(params, x, h0, c0)
    dx, dh_prev, dc_prev, grads = nn.lstm_step_backward(params, dh, dc, cache)
    assert nn.finite_diff_check(params, loss, grads) < 1e-5

    wrapped = {"x": x, "h0": h0, "c0": c0}

    def loss_inputs():
        h, c, _ = nn.lstm_step(params, wrapped["x"], wrapped["h0"], wrapped["c0"])
        return float(dh @ h + dc @ c)

    assert nn.finite_diff_check(
        wrapped, loss_inputs, {"x": dx, "h0": dh_prev, "c0": dc_prev}) < 1e-5


def test_random_shape_gradient_suite():
    """50 random shapes across the stack, all within 1e-5 relative."""
    rng = np.random.default_rng(6)
    for case in range(50):
        kind = case % 3
        if kind == 0:
            in_dim, out_dim = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            params = nn.dense_init(rng, in_dim, out_dim)
            x = rng.normal(size=in_dim)
            dy = rng.normal(size=out_dim)

            def loss():
                y, _ = nn.dense_forward(params, x)
                return float(dy @ np.tanh(y))

            y, cache = nn.dense_forward(params, x)
            _, grads = nn.dense_backward(params, dy * (1 - np.tanh(y) ** 2), cache)
        elif kind == 1:
            dim = int(rng.integers(2, 10))
            params = nn.layer_norm_init(dim)
            params["gain"] = rng.normal(size=dim)
            x = rng.normal(size=dim)
            dy = rng.normal(size=dim)

            def loss():
                y, _ = nn.layer_norm_forward(params, x)
                return float(dy @ y)

            _, cache = nn.layer_norm_forward(params, x)
            _, grads = nn.layer_norm_backward(params, dy, cache)
        else:
            in_dim, hidden = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            params = nn.lstm_init(rng, in_dim, hidden)
            x = rng.normal(size=in_dim)
            h0 = rng.normal(size=hidden)
            c0 = rng.normal(size=hidden)
            dh = rng.normal(size=hidden)

            def loss():
                h, _, _ = nn.lstm_step(params, x, h0, c0)
                return float(dh @ h)

            _, _, cache = nn.lstm_step(params, x, h0, c0)
            _, _, _, grads = nn.lstm_step_backward(params, dh, np.zeros(hidden), cache)
        assert nn.finite_diff_check(params, loss, grads) < 1e-5


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_grad_no_change():
    params = {"w": np.array([1.0, -2.0])}
    before = params["w"].copy()
    nn.Adam().update(params, {"w": np.zeros(2)})
    np.testing.assert_array_equal(params["w"], before)


def test_adam_first_step_is_lr_times_sign():
    params = {"w": np.array([0.0, 0.0])}
    grads = {"w": np.array([0.3, -7.0])}
    opt = nn.Adam(lr=0.0005)
    opt.update(params, grads)
    np.testing.assert_allclose(params["w"], [-0.0005, 0.0005], rtol=1e-4)


def test_adam_deterministic():
    out = []
    for _ in range(2):
        params = {"w": np.linspace(0, 1, 4)}
        opt = nn.Adam()
        for step in range(5):
            opt.update(params, {"w": np.cos(params["w"]) + step})
        out.append(params["w"].copy())
    np.testing.assert_array_equal(out[0], out[1])


def test_adam_shape_mismatch():
    with pytest.raises(nn.ShapeError):
        nn.Adam().update({"w": np.zeros(2)}, {"w": np.zeros(3)})


# ---------------------------------------------------------------------------
# utilities


def test_finite_diff_check_validates_h():
    with pytest.raises(ValueError):
        nn.finite_diff_check({"w": np.zeros(1)}, lambda: 0.0, {"w": np.zeros(1)}, h=1e-2)


def test_accumulate_and_global_norm():
    total = {}
    nn.accumulate(total, {"a": np.array([1.0, 2.0])})
    nn.accumulate(total, {"a": np.array([1.0, -2.0]), "b": np.array([3.0])})
    np.testing.assert_array_equal(total["a"], [2.0, 0.0])
    assert nn.global_norm({"a": np.array([3.0, 4.0])}) == pytest.approx(5.0)


def test_clip_by_global_norm():
    grads = {"a": np.array([3.0, 4.0])}
    clipped = nn.clip_by_global_norm(grads, 1.0)
    assert nn.global_norm(clipped) == pytest.approx(1.0)
    untouched = nn.clip_by_global_norm(grads, 10.0)
    np.testing.assert_array_equal(untouched["a"], grads["a"])
