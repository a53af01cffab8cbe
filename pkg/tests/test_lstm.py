"""
Tests the LSTM network: initialization, forward step, stateful runs and
backpropagation through time (checked against central finite differences)
"""
import math
import os
import unittest

import numpy as np
from numpy.testing import assert_array_equal, assert_allclose

from qoelstm.core.lstm import (NetworkConfig, LstmLayerWeights, OutputHead,
                               LstmNetwork, CellState, init, step,
                               run_sequence, forward_windows,
                               backward_windows, backward, sequence_states)
from qoelstm.core.numerics import ShapeError, make_rng


SLOW_TESTS = os.environ.get('QOE_LSTM_SLOW_TESTS', '') == '1'


def constant_network(layers=1, units=1, inputs=1, head_bias=0.0):
    """A network with all parameters zero except the head bias"""
    config = NetworkConfig(layers, units, inputs)
    net = init(config, make_rng(0)).zeros_like()
    net.head.b[0] = head_bias
    return net


def loss_of(net, xs, ys, initial=None):
    y_hats, _ = forward_windows(net, xs, initial)
    return np.mean((y_hats - ys) ** 2)


def max_gradient_violation(net, xs, ys, eps=1e-5, rtol=1e-5, atol=1e-8,
                           initial=None):
    """Compare BPTT gradients with central finite differences on every
    parameter. Return the max of |g - g_fd| - (atol + rtol * |g_fd|)
    (<= 0: all gradients match)"""
    grads, _ = backward_windows(net, xs, ys, initial)
    net = net.copy()
    worst = -np.inf
    for param, grad in zip(net.parameters(), grads.parameters()):
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            loss_plus = loss_of(net, xs, ys, initial)
            param[idx] = orig - eps
            loss_minus = loss_of(net, xs, ys, initial)
            param[idx] = orig
            g_fd = (loss_plus - loss_minus) / (2 * eps)
            worst = max(worst,
                        abs(grad[idx] - g_fd) - (atol + rtol * abs(g_fd)))
    return worst


class Test(unittest.TestCase):

    def test_config(self):
        config = NetworkConfig()
        self.assertEqual((config.layers, config.units, config.inputs),
                         (2, 22, 3))
        self.assertEqual(config.n_params, 6799)
        self.assertEqual(init(config, make_rng(0)).n_params, 6799)
        self.assertEqual(NetworkConfig.from_dict(config.to_dict()), config)
        for bad in ({'layers': 0}, {'units': 0}, {'inputs': 0},
                    {'units': 2.5}, {'layers': True}):
            with self.assertRaises(ValueError):
                NetworkConfig(**bad)

    def test_init(self):
        config = NetworkConfig(1, 1, 1)
        net1, net2 = init(config, make_rng(7)), init(config, make_rng(7))
        for arr1, arr2 in zip(net1.parameters(), net2.parameters()):
            assert_array_equal(arr1, arr2)

        net = init(NetworkConfig(2, 22, 3), make_rng(1))
        for k, layer in enumerate(net.layers):
            _, _, b_f = layer.gate('f')
            assert_array_equal(b_f, 1.0)
            for gate in ('i', 'g', 'o'):
                assert_array_equal(layer.gate(gate)[2], 0.0)
                w_g, u_g, _ = layer.gate(gate)
                fan_in = 3 if k == 0 else 22
                self.assertTrue(np.all(np.abs(w_g) <=
                                       np.sqrt(6 / (fan_in + 22))))
                np.testing.assert_allclose(u_g @ u_g.T, np.eye(22),
                                           atol=1e-12)
        self.assertEqual(net.head.bias, 0.0)

    def test_shapes(self):
        with self.assertRaises(ShapeError):
            LstmLayerWeights(np.zeros((4, 2)), np.zeros((4, 2)), np.zeros(4))
        net = init(NetworkConfig(2, 3, 2), make_rng(0))
        with self.assertRaises(ShapeError):
            # first layer with the input size of the second layer:
            LstmNetwork(NetworkConfig(2, 3, 2), [net.layers[1]] * 2, net.head)
        with self.assertRaises(ShapeError):
            LstmNetwork(net.config, net.layers, OutputHead(np.zeros(4), 0))

    def test_step_zero_network(self):
        net = constant_network(2, 3, 2)
        y_hat, state = step(net, [0.4, -2.0])
        self.assertEqual(y_hat, 0.0)
        for c, h in zip(state.c, state.h):
            assert_array_equal(c, 0)
            assert_array_equal(h, 0)

    def test_step_bias_only(self):
        net = constant_network(head_bias=0.3)
        for x in (-1.0, 0.0, 5.0):
            self.assertEqual(step(net, [x])[0], 0.3)
        y_hats, _ = run_sequence(net, np.random.default_rng(0).random((5, 1)))
        assert_array_equal(y_hats, [0.3] * 5)

    def test_step_hand_evaluated(self):
        config = NetworkConfig(1, 1, 1)
        layer = LstmLayerWeights(np.ones((4, 1)), np.zeros((4, 1)),
                                 np.zeros(4))
        net = LstmNetwork(config, [layer], OutputHead([1.0], 0.0))
        y_hat, state = step(net, [1.0])
        sig1 = 1.0 / (1.0 + math.exp(-1.0))
        self.assertAlmostEqual(sig1, 0.731059, places=6)
        self.assertAlmostEqual(math.tanh(1.0), 0.761594, places=6)
        c = sig1 * math.tanh(1.0)
        h = sig1 * math.tanh(c)
        self.assertAlmostEqual(state.c[0][0], c, places=14)
        self.assertAlmostEqual(state.h[0][0], h, places=14)
        self.assertAlmostEqual(y_hat, h, places=14)

    def test_step_errors(self):
        net = init(NetworkConfig(1, 2, 3), make_rng(0))
        with self.assertRaises(ShapeError):
            step(net, [1.0, 2.0])
        with self.assertRaises(ValueError):
            step(net, [1.0, np.nan, 0.0])
        with self.assertRaises(ValueError):
            step(net, [1.0, np.inf, 0.0])

    def test_purity(self):
        net = init(NetworkConfig(), make_rng(3))
        before = [_.copy() for _ in net.parameters()]
        xs = make_rng(4).random((10, 3))
        out1, state1 = run_sequence(net, xs)
        out2, state2 = run_sequence(net, xs)
        assert_array_equal(out1, out2)
        for arr1, arr2 in zip(before, net.parameters()):
            assert_array_equal(arr1, arr2)
        # length-1 series is one step:
        y_hat, _ = step(net, xs[0])
        self.assertEqual(run_sequence(net, xs[:1])[0][0], y_hat)

    def test_stateful_chaining(self):
        """splitting a sequence at any t and carrying the state reproduces the
        unbroken run bit-exactly"""
        rng = make_rng(11)
        net = init(NetworkConfig(), rng)
        for _ in range(100):
            length = int(rng.integers(2, 16))
            xs = rng.random((length, 3))
            full, final = run_sequence(net, xs)
            for t in range(1, length):
                first, state = run_sequence(net, xs[:t])
                second, final2 = run_sequence(net, xs[t:], state)
                assert_array_equal(np.concatenate([first, second]), full)
                for k in range(net.config.layers):
                    assert_array_equal(final.c[k], final2.c[k])
                    assert_array_equal(final.h[k], final2.h[k])

    def test_boundedness(self):
        rng = make_rng(5)
        net = init(NetworkConfig(2, 8, 3), rng)
        state = CellState.zeros(net.config)
        for t in range(1, 200):
            _, state = step(net, rng.normal(0, 10, 3), state)
            for c, h in zip(state.c, state.h):
                self.assertTrue(np.all(np.abs(h) <= 1))
                self.assertTrue(np.all(np.abs(c) <= t))

    def test_forward_windows_matches_run_sequence(self):
        rng = make_rng(2)
        net = init(NetworkConfig(2, 5, 3), rng)
        xs = rng.random((6, 4, 3))
        y_hats, _ = forward_windows(net, xs)
        for window, y_win in zip(xs, y_hats):
            np.testing.assert_allclose(run_sequence(net, window)[0], y_win,
                                       rtol=1e-12, atol=1e-14)

    def test_carried_windows_match_run_sequence(self):
        """windows starting from the state carried from the preceding
        seconds reproduce the stateful run over the whole series"""
        rng = make_rng(3)
        net = init(NetworkConfig(2, 5, 3), rng)
        series = rng.random((2, 12, 3))
        states = sequence_states(net, series)
        self.assertEqual(len(states), 2)
        self.assertEqual(states[0][0].shape, (13, 2, 5))
        starts = [0, 3, 8]
        for b in range(2):
            y_full, final = run_sequence(net, series[b])
            for k, (c, h) in enumerate(states):
                assert_array_equal(c[0, b], 0)
                assert_array_equal(h[0, b], 0)
                assert_allclose(c[-1, b], final.c[k], rtol=1e-12, atol=1e-14)
                assert_allclose(h[-1, b], final.h[k], rtol=1e-12, atol=1e-14)
            xs = np.stack([series[b, s: s + 4] for s in starts])
            initial = CellState(c=tuple(c[starts, b] for c, _ in states),
                                h=tuple(h[starts, b] for _, h in states))
            y_hats, _ = forward_windows(net, xs, initial)
            for y_win, s in zip(y_hats, starts):
                assert_allclose(y_win, y_full[s: s + 4], rtol=1e-12,
                                atol=1e-14)
        with self.assertRaises(ShapeError):
            forward_windows(net, xs, CellState.zeros(net.config))

    def test_gradient_check_initial_state(self):
        rng = make_rng(21)
        net = init(NetworkConfig(2, 3, 3), rng)
        xs, ys = rng.random((2, 4, 3)), rng.random((2, 4))
        initial = CellState(
            c=tuple(rng.normal(0, 1, (2, 3)) for _ in range(2)),
            h=tuple(rng.uniform(-1, 1, (2, 3)) for _ in range(2)))
        self.assertNotEqual(loss_of(net, xs, ys),
                            loss_of(net, xs, ys, initial))
        self.assertLessEqual(max_gradient_violation(net, xs, ys,
                                                    initial=initial), 0)

    def test_backward_at_optimum(self):
        rng = make_rng(8)
        net = init(NetworkConfig(2, 4, 3), rng)
        xs = rng.random((3, 4, 3))
        y_hats, _ = forward_windows(net, xs)
        grads, loss = backward_windows(net, xs, y_hats)
        self.assertEqual(loss, 0.0)
        for grad in grads.parameters():
            assert_array_equal(grad, 0.0)

    def test_backward_single_step_head_bias(self):
        net = init(NetworkConfig(1, 3, 3), make_rng(9))
        x, y = np.array([0.2, 1.0, 0.5]), 0.9
        y_hat, _ = step(net, x)
        grads, loss = backward(net, [(x, y)])
        self.assertAlmostEqual(loss, (y_hat - y) ** 2, places=14)
        self.assertAlmostEqual(grads.head.bias, 2 * (y_hat - y), places=14)
        # window of length 4: gradient is the mean over the 4 seconds
        window = [(x, y)] * 4
        y_hats, _ = run_sequence(net, np.array([x] * 4))
        grads, _ = backward(net, window)
        self.assertAlmostEqual(grads.head.bias,
                               np.sum(2 * (y_hats - y)) / 4, places=14)

    def test_backward_errors(self):
        net = init(NetworkConfig(1, 3, 3), make_rng(9))
        with self.assertRaises(ValueError):
            backward(net, [(np.zeros(3), np.nan)])
        with self.assertRaises(ValueError):
            backward(net, [])
        with self.assertRaises(ShapeError):
            backward_windows(net, np.zeros((2, 4, 3)), np.zeros((2, 3)))

    def test_gradient_check_small(self):
        for seed in range(5):
            rng = make_rng(seed)
            net = init(NetworkConfig(2, 3, 3), rng)
            # move biases away from their init values:
            for layer in net.layers:
                layer.b += rng.normal(0, 0.5, layer.b.shape)
            net.head.b += 0.1
            xs = rng.random((2, 4, 3))
            ys = rng.random((2, 4))
            self.assertLessEqual(max_gradient_violation(net, xs, ys), 0)

    def test_gradient_check_default_network(self):
        rng = make_rng(100)
        net = init(NetworkConfig(2, 22, 3), rng)
        xs, ys = rng.random((1, 4, 3)), rng.random((1, 4))
        self.assertLessEqual(max_gradient_violation(net, xs, ys), 0)

    @unittest.skipUnless(SLOW_TESTS, 'set QOE_LSTM_SLOW_TESTS=1 to run')
    def test_gradient_check_seeds_and_windows(self):
        """5 seeds x 5 random windows of length 4 on LSTM(2, 22), m=3"""
        for seed in range(5):
            rng = make_rng(seed)
            net = init(NetworkConfig(2, 22, 3), rng)
            for _ in range(5):
                xs, ys = rng.random((1, 4, 3)), rng.random((1, 4))
                self.assertLessEqual(max_gradient_violation(net, xs, ys), 0)


if __name__ == "__main__":
    unittest.main()
