"""
Tests the session traces and the feature computation
"""
import unittest

import numpy as np
from numpy.testing import assert_array_equal, assert_allclose

from qoelstm.core.features import (SessionTrace, NormSpec, compute_pi,
                                   compute_tr, derive_norm, featurize,
                                   traces_features, ABLATION_SETS)


def make_trace(stsq, playing=None, qoe=None, video_id='v', **kwargs):
    stsq = np.asarray(stsq, dtype=float)
    if playing is None:
        playing = np.ones(len(stsq), dtype=bool)
    kwargs.setdefault('qoe_scale', (0, 100))
    return SessionTrace(video_id=video_id, stsq=stsq, playing=playing,
                        ground_truth_qoe=qoe, **kwargs)


class Test(unittest.TestCase):

    def test_compute_tr(self):
        assert_array_equal(compute_tr([1, 1, 1, 1]), [1, 2, 3, 4])
        assert_array_equal(compute_tr([1, 0, 0, 1, 1]), [1, 0, 0, 1, 2])
        assert_array_equal(compute_tr([0, 1, 1]), [0, 1, 2])
        assert_array_equal(compute_tr([1, 1, 0, 1], 'constant', 10),
                           [10, 10, 0, 1])
        with self.assertRaises(ValueError):
            compute_tr([])
        with self.assertRaises(ValueError):
            compute_tr([1, 0], 'constant')

    def test_compute_tr_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            playing = rng.random(40) > 0.2
            t_r = compute_tr(playing)
            # zero iff rebuffering:
            assert_array_equal(t_r == 0, ~playing)
            # +1 per playing second after a stall (or the session start):
            for t in range(1, len(playing)):
                if playing[t]:
                    self.assertEqual(t_r[t], t_r[t - 1] + 1)

    def test_compute_pi(self):
        assert_array_equal(compute_pi([True, False]), [1, 0])
        assert_array_equal(compute_pi([True] * 3), [1, 1, 1])
        assert_array_equal(compute_pi([False] * 3), [0, 0, 0])

    def test_session_trace(self):
        trace = make_trace([1, 2, 3], [1, 0, 1], pattern_id='q1+s2')
        self.assertEqual(trace.duration, 3)
        self.assertTrue(trace.has_stalls)
        self.assertEqual(trace.pattern_tags, {'q1', 's2'})
        with self.assertRaises(ValueError):
            make_trace([1, 2, 3], [1, 1])
        with self.assertRaises(ValueError):
            make_trace([1, 2, 3], qoe=[1, 2])
        with self.assertRaises(ValueError):
            make_trace([1, np.nan])
        with self.assertRaises(ValueError):
            make_trace([1, 2], qoe_scale=(5, 5))
        with self.assertRaises(ValueError):
            make_trace([1, 2], vqa_orientation='sideways')

    def test_featurize_range_edges(self):
        norm = NormSpec(stsq_range=(0, 0.8), t_max=10, qoe_scale=(0, 100))
        series = featurize(make_trace([0.8] * 10), norm)
        assert_array_equal(series.column('stsq'), 1)
        self.assertEqual(series.x.shape, (10, 3))

        trace = make_trace([3, 7, 5, 4])
        series = featurize(trace)
        self.assertEqual(series.column('stsq').min(), 0)
        self.assertEqual(series.column('stsq').max(), 1)

    def test_featurize_tr(self):
        playing = np.ones(10, dtype=bool)
        playing[5] = False
        norm = NormSpec(stsq_range=(0, 1), t_max=10, qoe_scale=(0, 100))
        series = featurize(make_trace(np.full(10, .5), playing), norm)
        assert_allclose(series.column('tr'),
                        [.1, .2, .3, .4, .5, 0, .1, .2, .3, .4],
                        rtol=0, atol=1e-15)
        assert_array_equal(series.column('pi'), playing)

    def test_featurize_stsq_only(self):
        playing = np.ones(10, dtype=bool)
        playing[5] = False
        norm = NormSpec(stsq_range=(0, 1), t_max=10, qoe_scale=(0, 100))
        trace = make_trace(np.full(10, .5), playing)
        series = featurize(trace, norm, mode='stsq_only')
        assert_array_equal(series.column('pi'), 1)
        assert_allclose(series.column('tr'), np.arange(1, 11) / 10)
        self.assertEqual(series.norm.mode, 'stsq_only')

    def test_feature_subsets(self):
        trace = make_trace(np.linspace(0, 1, 6), [1, 1, 0, 1, 1, 1])
        full = featurize(trace)
        for letter, names in ABLATION_SETS.items():
            norm = derive_norm([trace], features=names)
            series = featurize(trace, norm)
            self.assertEqual(series.x.shape, (6, len(names)))
            for name in names:
                assert_array_equal(series.column(name), full.column(name))
        # features are always in canonical order:
        norm = derive_norm([trace], features=('tr', 'stsq'))
        self.assertEqual(norm.features, ('stsq', 'tr'))
        with self.assertRaises(ValueError):
            derive_norm([trace], features=('stsq', 'bitrate'))
        with self.assertRaises(ValueError):
            derive_norm([trace], features=())

    def test_orientation(self):
        trace = make_trace([0, 5, 10], vqa_orientation='lower',
                           vqa_range=(0, 10))
        series = featurize(trace)
        assert_allclose(series.column('stsq'), [1, .5, 0])

    def test_normalization_invertible(self):
        rng = np.random.default_rng(3)
        for orientation in ('higher', 'lower'):
            norm = NormSpec(stsq_range=(-2.26, 1.52), t_max=300,
                            qoe_scale=(-2.26, 1.52), orientation=orientation)
            values = rng.uniform(-2.26, 1.52, 1000)
            assert_allclose(norm.denormalize_stsq(norm.normalize_stsq(values)),
                            values, rtol=0, atol=1e-12)
            assert_allclose(norm.denormalize_qoe(norm.normalize_qoe(values)),
                            values, rtol=0, atol=1e-12)

    def test_derive_norm(self):
        traces = [make_trace([2, 4, 6]), make_trace([1, 3, 5, 7, 9])]
        norm = derive_norm(traces)
        self.assertEqual(norm.stsq_range, (1, 9))
        self.assertEqual(norm.t_max, 5)
        self.assertEqual(norm.qoe_scale, (0, 100))
        # declared VQA range wins over the training values:
        traces = [make_trace([.2, .4], vqa_range=(0, 1)),
                  make_trace([.3, .5], vqa_range=(0, 1))]
        self.assertEqual(derive_norm(traces).stsq_range, (0, 1))
        # partially or inconsistently declared ranges: training min/max
        mixed = [make_trace([.2, .4], vqa_range=(0, 1)),
                 make_trace([.3, .5])]
        self.assertEqual(derive_norm(mixed).stsq_range, (.2, .5))
        mixed = [make_trace([.2, .4], vqa_range=(0, 1)),
                 make_trace([.3, .5], vqa_range=(0, 2))]
        self.assertEqual(derive_norm(mixed).stsq_range, (.2, .5))
        # features of test traces use the training normalization:
        series = traces_features([make_trace([2, 1.5])], derive_norm(traces))
        assert_allclose(series[0].column('stsq'), [2, 1.5])
        assert_allclose(series[0].column('tr'), [.5, 1])

        with self.assertRaises(ValueError):
            derive_norm([])
        with self.assertRaises(ValueError):
            derive_norm([make_trace([3, 3, 3])])  # hi == lo
        with self.assertRaises(ValueError):
            derive_norm([make_trace([1, 2]),
                         make_trace([1, 2], qoe_scale=(1, 5))])

    def test_norm_spec_dict(self):
        norm = NormSpec(stsq_range=(0, 1), t_max=120, qoe_scale=(1, 5),
                        orientation='lower', features=('stsq', 'tr'),
                        mode='stsq_only', tr_before_stall='constant',
                        vqa_metric='STRRED')
        self.assertEqual(NormSpec.from_dict(norm.to_dict()), norm)
        self.assertEqual(norm.inputs, 2)
        self.assertEqual(norm.replace(t_max=60).t_max, 60)

    def test_featurize_pure(self):
        trace = make_trace(np.linspace(0, 1, 20), np.arange(20) % 7 != 3)
        stsq = trace.stsq.copy()
        assert_array_equal(featurize(trace).x, featurize(trace).x)
        assert_array_equal(trace.stsq, stsq)


if __name__ == "__main__":
    unittest.main()
