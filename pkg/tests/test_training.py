"""
Tests windowing, the Adam optimizer and model fitting
"""
import unittest
from os.path import join
from tempfile import TemporaryDirectory
from unittest.mock import patch

import numpy as np
from numpy.testing import assert_array_equal, assert_allclose

from qoelstm.core import lstm
from qoelstm.core.features import SessionTrace, derive_norm, featurize
from qoelstm.core.lstm import NetworkConfig
from qoelstm.core.metrics import lcc, rmse_n
from qoelstm.core.model import predict
from qoelstm.core.numerics import make_rng
from qoelstm.core.synth import SynthConfig, gen_corpus
from qoelstm.core.training import (TrainConfig, TrainingError, Adam,
                                   TrainingWindows, make_windows,
                                   traces_windows, fit)


def random_trace(video_id, duration, rng, qoe=None):
    return SessionTrace(video_id=video_id, stsq=rng.random(duration),
                        playing=np.ones(duration, dtype=bool),
                        ground_truth_qoe=qoe, qoe_scale=(0, 100),
                        vqa_range=(0, 1))


def small_corpus():
    return gen_corpus(SynthConfig(n_contents=2, n_patterns=2, duration=40,
                                  stall_margin=5))


class Test(unittest.TestCase):

    def test_train_config(self):
        config = TrainConfig()
        self.assertEqual((config.timestep, config.epochs, config.batch_size,
                          config.learning_rate, config.beta1, config.beta2,
                          config.epsilon, config.patience,
                          config.window_state, config.lr_decay),
                         (4, 200, 32, 1e-3, 0.9, 0.999, 1e-8, 20, 'carried',
                          1.0))
        self.assertEqual(TrainConfig.from_dict(config.to_dict()), config)
        with self.assertRaises(ValueError):
            TrainConfig.from_dict({'epochs': 3, 'dropout': 0.2})
        for bad in ({'timestep': 0}, {'learning_rate': 0}, {'epochs': -1},
                    {'batch_size': 0}, {'beta1': 1}, {'epsilon': 0},
                    {'window_state': 'random'}, {'lr_decay': 0},
                    {'lr_decay': 1.5}):
            with self.assertRaises(ValueError):
                TrainConfig(**bad)

    def test_make_windows(self):
        rng = np.random.default_rng(0)
        for length, timestep, expected in ((4, 4, 1), (120, 4, 117),
                                           (30, 1, 30)):
            series = featurize(random_trace('v', length, rng))
            targets = rng.random(length)
            xs, ys = make_windows(series, targets, timestep)
            self.assertEqual(xs.shape, (expected, timestep, 3))
            self.assertEqual(ys.shape, (expected, timestep))
            for k in (0, expected - 1):
                assert_array_equal(xs[k], series.x[k: k + timestep])
                assert_array_equal(ys[k], targets[k: k + timestep])

        series = featurize(random_trace('short_one', 3, rng))
        with self.assertRaises(ValueError) as ctx:
            make_windows(series, np.zeros(3), 4)
        self.assertIn('short_one', str(ctx.exception))
        with self.assertRaises(ValueError):
            make_windows(series, np.zeros(2), 2)

    def test_traces_windows(self):
        rng = np.random.default_rng(1)
        qoe = rng.uniform(0, 100, 10)
        traces = [random_trace('a', 10, rng, qoe),
                  random_trace('b', 6, rng, qoe[:6])]
        norm = derive_norm(traces)
        xs, ys = traces_windows(traces, norm, 4)
        self.assertEqual(len(xs), 7 + 3)
        # target normalization round trip:
        assert_allclose(norm.denormalize_qoe(ys[0]), qoe[:4], rtol=0,
                        atol=1e-9)
        with self.assertRaises(ValueError):
            traces_windows([random_trace('c', 10, rng)], norm)

    def test_training_windows_carried_state(self):
        rng = np.random.default_rng(3)
        qoe = rng.uniform(0, 100, 12)
        traces = [random_trace('a', 12, rng, qoe),
                  random_trace('b', 7, rng, qoe[:7])]
        norm = derive_norm(traces)
        windows = TrainingWindows(traces, norm, 4)
        self.assertEqual(len(windows), 9 + 4)
        assert_array_equal(windows.owner, [0] * 9 + [1] * 4)
        assert_array_equal(windows.start, list(range(9)) + list(range(4)))
        self.assertEqual(windows.preceding.shape, (2, 8, 3))

        net = lstm.init(NetworkConfig(2, 4, 3), make_rng(0))
        self.assertIsNone(windows.initial_states(net, 'zero'))
        states = windows.initial_states(net)
        series = [featurize(_, norm).x for _ in traces]
        for w in (0, 5, 8, 9, 12):
            owner, start = windows.owner[w], windows.start[w]
            expected = lstm.CellState.zeros(net.config) if start == 0 else \
                lstm.run_sequence(net, series[owner][:start])[1]
            for k in range(2):
                assert_allclose(states.c[k][w], expected.c[k], rtol=1e-12,
                                atol=1e-14)
                assert_allclose(states.h[k][w], expected.h[k], rtol=1e-12,
                                atol=1e-14)

        # from the carried state, windows see the outputs of the stateful run
        # over the whole session:
        preds = [lstm.run_sequence(net, _)[0] for _ in series]
        expected = np.mean([(preds[o][s: s + 4] - y) ** 2 for o, s, y in
                            zip(windows.owner, windows.start, windows.ys)])
        self.assertAlmostEqual(windows.loss(net), expected, places=12)
        self.assertNotAlmostEqual(windows.loss(net, 'zero'), expected,
                                  places=6)

    def test_adam(self):
        param = np.array([0.0, 10.0])
        optimizer = Adam([param], learning_rate=0.1)
        optimizer.step([2 * (param - 3)])
        # first step moves each parameter by ~learning_rate:
        assert_allclose(param, [0.1, 9.9], rtol=0, atol=1e-6)

        param = np.array([0.0, 10.0])
        optimizer = Adam([param], learning_rate=0.01)
        for _ in range(2000):
            optimizer.step([2 * (param - 3)])
        assert_allclose(param, [3, 3], rtol=0, atol=0.05)

    def test_fit_constant_target(self):
        """a constant QoE is learned (the head bias alone can represent it)"""
        rng = np.random.default_rng(2)
        traces = [random_trace(f'v{i}', 8, rng, np.full(8, 70.0))
                  for i in range(32)]
        model = fit(traces, NetworkConfig(1, 4),
                    TrainConfig(timestep=8, epochs=50, batch_size=1,
                                learning_rate=3e-3))
        for trace in traces[:5]:
            pred = predict(model, trace)
            self.assertLess(rmse_n(pred, trace.ground_truth_qoe, (0, 100)),
                            1)

    def test_fit(self):
        corpus = small_corpus()
        traces = corpus.traces[:3]
        model = fit(traces, NetworkConfig(1, 6), TrainConfig(epochs=15),
                    provenance={'corpus': corpus.name})
        prov = model.provenance
        self.assertEqual(prov['corpus'], corpus.name)
        self.assertEqual(prov['train_ids'], [_.video_id for _ in traces])
        self.assertEqual(prov['net_config'], {'l': 1, 'd': 6, 'm': 3})
        self.assertEqual(prov['rng'], 'PCG64')
        self.assertEqual(prov['epochs_run'], 15)
        self.assertEqual(len(prov['loss_curve']), 15)
        self.assertLess(prov['final_loss'], prov['initial_loss'])
        # normalization from the training traces only:
        self.assertEqual(model.norm, derive_norm(traces))

        model = fit(traces, NetworkConfig(1, 2), TrainConfig(epochs=1),
                    features=('stsq', 'tr'))
        self.assertEqual(model.network.config.inputs, 2)
        self.assertEqual(model.norm.features, ('stsq', 'tr'))

        with self.assertRaises(ValueError):
            fit([])

    def test_fit_learns_stateful_qoe(self):
        """the stateful prediction on the training traces follows the QoE"""
        traces = small_corpus().traces
        self.assertTrue(any(_.has_stalls for _ in traces))
        model = fit(traces, NetworkConfig(1, 10),
                    TrainConfig(epochs=150, batch_size=8, learning_rate=5e-3,
                                lr_decay=0.99, patience=0))
        preds = [predict(model, _) for _ in traces]
        truth = [_.ground_truth_qoe for _ in traces]
        self.assertGreater(lcc(np.concatenate(preds), np.concatenate(truth)),
                           0.85)
        for pred, qoe in zip(preds, truth):
            self.assertLess(rmse_n(pred, qoe, (0, 100)), 15)

    def test_fit_deterministic(self):
        traces = small_corpus().traces[:2]
        config = TrainConfig(epochs=3, seed=11)
        with TemporaryDirectory() as tmpdir:
            contents = []
            for name in ('m1.model.json', 'm2.model.json'):
                fit(traces, NetworkConfig(2, 5), config).save(join(tmpdir,
                                                                   name))
                with open(join(tmpdir, name), 'rb') as fp:
                    contents.append(fp.read())
            self.assertEqual(contents[0], contents[1])
            other = fit(traces, NetworkConfig(2, 5),
                        TrainConfig(epochs=3, seed=12))
            other.save(join(tmpdir, 'm3.model.json'))
            with open(join(tmpdir, 'm3.model.json'), 'rb') as fp:
                self.assertNotEqual(fp.read(), contents[0])

    def test_early_stop(self):
        traces = small_corpus().traces[:1]
        model = fit(traces, NetworkConfig(1, 2),
                    TrainConfig(epochs=50, patience=1, min_delta=10))
        self.assertEqual(model.provenance['epochs_run'], 2)
        model = fit(traces, NetworkConfig(1, 2),
                    TrainConfig(epochs=5, patience=0, min_delta=10))
        self.assertEqual(model.provenance['epochs_run'], 5)

    def test_non_finite_loss(self):
        backward_windows = lstm.backward_windows

        def nan_loss(net, xs, ys, initial=None):
            grads, _ = backward_windows(net, xs, ys, initial)
            return grads, float('nan')

        traces = small_corpus().traces[:1]
        with patch('qoelstm.core.lstm.backward_windows',
                   side_effect=nan_loss):
            with self.assertRaises(TrainingError) as ctx:
                fit(traces, NetworkConfig(1, 2), TrainConfig(epochs=2))
        self.assertEqual((ctx.exception.epoch, ctx.exception.batch), (0, 0))
        self.assertIn('epoch 0, batch 0', str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
