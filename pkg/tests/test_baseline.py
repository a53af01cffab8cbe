"""
Tests the memoryless affine baseline
"""
import unittest

import numpy as np
from numpy.testing import assert_allclose

from qoelstm.core.baseline import fit_affine, predict_affine
from qoelstm.core.features import SessionTrace, derive_norm, featurize


def sessions(rng, qoe_func=None, norm=None):
    ret = []
    for i, duration in enumerate((30, 45, 60)):
        playing = np.ones(duration, dtype=bool)
        playing[10 + i: 14 + 2 * i] = False
        stsq = rng.random(duration)
        trace = SessionTrace(video_id=f'v{i}', stsq=stsq, playing=playing,
                             qoe_scale=(0, 100), vqa_range=(0, 1))
        if qoe_func is not None:
            trace = SessionTrace(video_id=f'v{i}', stsq=stsq, playing=playing,
                                 qoe_scale=(0, 100), vqa_range=(0, 1),
                                 ground_truth_qoe=qoe_func(trace, norm))
        ret.append(trace)
    return ret


class Test(unittest.TestCase):

    def test_affine_recovery(self):
        norm = derive_norm(sessions(np.random.default_rng(0)))
        coef, intercept = np.array([0.5, 0.2, 0.1]), 0.1

        def affine_qoe(trace, norm):
            return 100 * (featurize(trace, norm).x @ coef + intercept)

        traces = sessions(np.random.default_rng(0), affine_qoe, norm)
        model = fit_affine(traces)
        self.assertEqual(model.name, 'affine')
        self.assertEqual(model.norm, norm)
        assert_allclose(model.coef, coef, rtol=0, atol=1e-8)
        self.assertAlmostEqual(model.intercept, intercept, places=8)
        for trace in traces:
            assert_allclose(predict_affine(model, trace),
                            trace.ground_truth_qoe, rtol=0, atol=1e-6)

    def test_feature_subset(self):
        rng = np.random.default_rng(1)
        norm = derive_norm(sessions(np.random.default_rng(1)))

        def stsq_qoe(trace, norm):
            return 100 * featurize(trace, norm).column('stsq')

        traces = sessions(rng, stsq_qoe, norm)
        model = fit_affine(traces, features=('stsq',))
        assert_allclose(model.coef, [1], atol=1e-8)
        self.assertAlmostEqual(model.intercept, 0, places=8)

    def test_errors(self):
        with self.assertRaises(ValueError):
            fit_affine([])
        with self.assertRaises(ValueError):
            fit_affine(sessions(np.random.default_rng(2)))  # no QoE

    def test_clamped(self):
        norm = derive_norm(sessions(np.random.default_rng(3)))
        traces = sessions(np.random.default_rng(3),
                          lambda trace, norm: np.full(trace.duration, 250.0),
                          norm)
        # out of scale ground truth is accepted, predictions are clamped:
        model = fit_affine(traces)
        for trace in traces:
            assert_allclose(predict_affine(model, trace), 100)


if __name__ == "__main__":
    unittest.main()
