import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringlab.errors import CheckpointError, DivergenceError
from ringlab.nets import (
    AdamState,
    Mlp,
    OUT_TANH_AFFINE,
    adam_step,
    backward,
    forward,
    load_mlp,
    mlp_init,
    penultimate,
    save_mlp,
    soft_update,
)


def random_net(dims, seed=0, output="identity", bounds=None, scale=0.5):
    net = mlp_init(dims, output=output, bounds=bounds, seed=seed,
                   final_scale=scale)
    rng = np.random.default_rng(seed + 100)
    for k in range(net.n_layers):
        net.weights[k] = rng.normal(0, 0.7 / np.sqrt(dims[k]), net.weights[k].shape)
        net.biases[k] = rng.normal(0, 0.1, net.biases[k].shape)
    return net


def straight_line_eval(net, x):
    """Independent re-implementation of the forward pass."""
    h = np.asarray(x, dtype=float)
    for k in range(net.n_layers - 1):
        h = np.tanh(h.dot(net.weights[k]) + net.biases[k])
    z = h.dot(net.weights[-1]) + net.biases[-1]
    if net.output == OUT_TANH_AFFINE:
        return net.out_lo + (np.tanh(z) + 1.0) / 2.0 * (net.out_hi - net.out_lo)
    return z


class TestForward:
    def test_zero_network_outputs_zero(self):
        net = mlp_init([3, 8, 2], seed=0)
        for k in range(net.n_layers):
            net.weights[k][:] = 0.0
            net.biases[k][:] = 0.0
        y, _ = forward(net, np.ones(3))
        assert np.array_equal(y, np.zeros(2))

    def test_identity_layers_give_tanh(self):
        net = Mlp([np.eye(4), np.eye(4)], [np.zeros(4), np.zeros(4)])
        x = np.array([0.3, -0.7, 1.2, 0.0])
        y, _ = forward(net, x)
        assert np.allclose(y, np.tanh(x), atol=0, rtol=0)

    def test_matches_independent_evaluator(self):
        net = random_net([5, 32, 32, 3], seed=2)
        x = np.random.default_rng(7).normal(size=(11, 5))
        y, _ = forward(net, x)
        assert np.allclose(y, straight_line_eval(net, x), atol=1e-12, rtol=0)

    def test_bounded_head_matches_evaluator(self):
        net = random_net([4, 16, 2], seed=3, output=OUT_TANH_AFFINE,
                         bounds=[(-3, 1), (-1, 1)])
        x = np.random.default_rng(8).normal(size=(6, 4))
        y, _ = forward(net, x)
        assert np.allclose(y, straight_line_eval(net, x), atol=1e-12, rtol=0)

    def test_dimension_mismatch(self):
        net = mlp_init([3, 4, 1], seed=0)
        with pytest.raises(ValueError):
            forward(net, np.ones(5))

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_actor_outputs_always_in_bounds(self, vals):
        net = random_net([4, 8, 1], seed=5, output=OUT_TANH_AFFINE,
                         bounds=[(-3.0, 1.0)], scale=2.0)
        y, _ = forward(net, np.array(vals))
        assert -3.0 <= y[0] <= 1.0


class TestBackward:
    def test_zero_output_gradient(self):
        net = random_net([3, 8, 2], seed=1)
        x = np.ones((4, 3))
        _, cache = forward(net, x)
        grads, gin = backward(net, cache, np.zeros((4, 2)))
        assert all(np.all(dw == 0) and np.all(db == 0) for dw, db in grads)
        assert np.all(gin == 0)

    def test_linear_single_layer_input_gradient(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(4, 2))
        net = Mlp([w.copy()], [np.zeros(2)])
        g = rng.normal(size=2)
        _, cache = forward(net, np.ones(4))
        _, gin = backward(net, cache, g)
        assert np.allclose(gin, w @ g, atol=1e-14)

    @pytest.mark.parametrize("output,bounds", [
        ("identity", None),
        (OUT_TANH_AFFINE, [(-3.0, 1.0), (-1.0, 1.0)]),
    ])
    def test_finite_difference_agreement(self, output, bounds):
        out_dim = 2
        net = random_net([4, 24, 24, out_dim], seed=4, output=output, bounds=bounds)
        rng = np.random.default_rng(11)
        x = rng.normal(size=(8, 4))
        gout = rng.normal(size=(8, out_dim))
        _, cache = forward(net, x)
        grads, _ = backward(net, cache, gout)

        def loss(n):
            y, _ = forward(n, x)
            return float((y * gout).sum())

        h = 1e-5
        rel_errs = []
        check_rng = np.random.default_rng(5)
        for k in range(net.n_layers):
            for arr, g in ((net.weights[k], grads[k][0]), (net.biases[k], grads[k][1])):
                flat = arr.reshape(-1)
                gflat = g.reshape(-1)
                ids = check_rng.choice(flat.size, size=min(60, flat.size), replace=False)
                for i in ids:
                    old = flat[i]
                    flat[i] = old + h
                    lp = loss(net)
                    flat[i] = old - h
                    lm = loss(net)
                    flat[i] = old
                    fd = (lp - lm) / (2 * h)
                    denom = max(abs(fd), abs(gflat[i]), 1e-8)
                    rel_errs.append(abs(fd - gflat[i]) / denom)
        rel_errs = np.array(rel_errs)
        assert np.mean(rel_errs <= 1e-4) >= 0.99
        assert rel_errs.max() <= 1e-3

    def test_stale_cache_rejected(self):
        net = random_net([3, 8, 2], seed=1)
        _, cache = forward(net, np.ones((4, 3)))
        with pytest.raises(ValueError):
            backward(net, cache, np.zeros((5, 2)))


class TestAdam:
    def zero_grads(self, net):
        return [(np.zeros_like(w), np.zeros_like(b))
                for w, b in zip(net.weights, net.biases)]

    def test_zero_gradient_fixed_point(self):
        net = random_net([2, 4, 1], seed=6)
        w0 = [w.copy() for w in net.weights]
        opt = AdamState.for_net(net, 1e-3)
        adam_step(net, self.zero_grads(net), opt)
        assert all(np.array_equal(a, b) for a, b in zip(net.weights, w0))

    def test_weight_decay_factor(self):
        net = random_net([2, 4, 1], seed=6)
        w0 = [w.copy() for w in net.weights]
        opt = AdamState.for_net(net, 1e-3)
        adam_step(net, self.zero_grads(net), opt, l2_lambda=1e-4)
        factor = 1.0 - 1e-3 * 1e-4
        assert all(np.allclose(a, b * factor, rtol=0, atol=0)
                   for a, b in zip(net.weights, w0))

    def test_scalar_recurrence_five_steps(self):
        # single scalar parameter, constant gradient g=0.3
        net = Mlp([np.array([[2.0]])], [np.array([0.0])])
        opt = AdamState.for_net(net, step_size=0.01)
        g = 0.3
        # hand-stepped Adam recurrence
        theta, m, v = 2.0, 0.0, 0.0
        expected = []
        for t in range(1, 6):
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mhat = m / (1 - 0.9 ** t)
            vhat = v / (1 - 0.999 ** t)
            theta -= 0.01 * mhat / (np.sqrt(vhat) + 1e-8)
            expected.append(theta)
        got = []
        for _ in range(5):
            adam_step(net, [(np.array([[g]]), np.array([0.0]))], opt)
            got.append(float(net.weights[0][0, 0]))
        assert np.allclose(got, expected, atol=1e-14)

    def test_nonfinite_gradient_rejected(self):
        net = random_net([2, 4, 1], seed=6)
        opt = AdamState.for_net(net, 1e-3)
        w0 = [w.copy() for w in net.weights]
        bad = self.zero_grads(net)
        bad[0][0][0, 0] = np.nan
        with pytest.raises(DivergenceError):
            adam_step(net, bad, opt)
        assert all(np.array_equal(a, b) for a, b in zip(net.weights, w0))


class TestSoftUpdate:
    def test_exact_formula(self):
        a = random_net([3, 6, 1], seed=1)
        b = random_net([3, 6, 1], seed=2)
        expect = [0.005 * w1 + 0.995 * w2 for w1, w2 in zip(a.weights, b.weights)]
        soft_update(b, a, rho=0.005)
        assert all(np.allclose(e, w, atol=0, rtol=0)
                   for e, w in zip(expect, b.weights))


class TestCheckpoint:
    def test_round_trip_identity(self, tmp_path):
        net = random_net([4, 16, 2], seed=9, output=OUT_TANH_AFFINE,
                         bounds=[(-3, 1), (-1, 1)])
        p = tmp_path / "net.ckpt"
        save_mlp(net, p)
        loaded = load_mlp(p)
        assert loaded.dims == net.dims
        assert loaded.output == net.output
        assert all(np.array_equal(a, b) for a, b in zip(net.weights, loaded.weights))
        assert all(np.array_equal(a, b) for a, b in zip(net.biases, loaded.biases))
        assert np.array_equal(net.out_lo, loaded.out_lo)

    def test_corrupted_magic(self, tmp_path):
        net = random_net([3, 4, 1], seed=0)
        p = tmp_path / "net.ckpt"
        save_mlp(net, p)
        blob = bytearray(p.read_bytes())
        blob[0] ^= 0xFF
        p.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError):
            load_mlp(p)

    def test_truncated_file(self, tmp_path):
        net = random_net([3, 4, 1], seed=0)
        p = tmp_path / "net.ckpt"
        save_mlp(net, p)
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(CheckpointError):
            load_mlp(p)

    def test_role_dimension_guard(self, tmp_path):
        actor = random_net([4, 8, 1], seed=0)
        p = tmp_path / "actor.ckpt"
        save_mlp(actor, p)
        with pytest.raises(CheckpointError):
            load_mlp(p, expect_dims=[5, 8, 1])  # critic expects obs+act dims


class TestPenultimate:
    def test_matches_hidden_activations(self):
        net = random_net([4, 16, 8, 2], seed=12)
        x = np.random.default_rng(0).normal(size=(5, 4))
        h = np.tanh(x @ net.weights[0] + net.biases[0])
        h = np.tanh(h @ net.weights[1] + net.biases[1])
        assert np.allclose(penultimate(net, x), h, atol=1e-15)
