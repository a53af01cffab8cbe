"""
Memoryless affine QoE model:
```
y(t) = a STSQ(t) + b PI(t) + c T_R(t) + e
```
fitted by least squares on the normalized features and QoE targets of the
training traces. Having no memory, it cannot reproduce the lingering effect
of past quality drops, and serves as reference for the LSTM-QoE model.

The fit uses scikit-learn's `LinearRegression` when scikit-learn is
installed, and `numpy.linalg.lstsq` otherwise.

.. seealso:: :mod:`qoelstm.core.training`
"""
from dataclasses import dataclass

import numpy as np

from qoelstm.core.features import (FEATURE_NAMES, NormSpec, derive_norm,
                                   featurize)


@dataclass(frozen=True, eq=False)
class AffineModel:
    """Coefficients (one per feature of `norm.features`) and intercept of
    the affine model, with the normalization it was fitted with"""
    coef: np.ndarray
    intercept: float
    norm: NormSpec

    @property
    def name(self):
        return 'affine'


try:
    from sklearn.linear_model import LinearRegression
    sklearn_imported = True
except ImportError:
    sklearn_imported = False


if sklearn_imported:

    def _lstsq(x, y):
        reg = LinearRegression().fit(x, y)
        return np.asarray(reg.coef_, dtype=float), float(reg.intercept_)

else:

    def _lstsq(x, y):
        design = np.column_stack([x, np.ones(len(x))])
        sol, *_ = np.linalg.lstsq(design, y, rcond=None)
        return sol[:-1], float(sol[-1])


def fit_affine(traces, norm: NormSpec = None, features=FEATURE_NAMES,
               mode='full'):
    """Fit the affine model on the given training traces, each with ground
    truth QoE

    :param traces: iterable of :class:`qoelstm.core.features.SessionTrace`
    :param norm: the :class:`qoelstm.core.features.NormSpec`, or None to
        derive it from `traces` (with the given `features` and `mode`)

    :return: an :class:`AffineModel`
    """
    traces = list(traces)
    if not traces:
        raise ValueError('Cannot fit the affine model on an empty set')
    if norm is None:
        norm = derive_norm(traces, features=features, mode=mode)
    xs, ys = [], []
    for trace in traces:
        if trace.ground_truth_qoe is None:
            raise ValueError(f'{trace.video_id}: no ground truth QoE')
        xs.append(featurize(trace, norm).x)
        ys.append(norm.normalize_qoe(trace.ground_truth_qoe))
    coef, intercept = _lstsq(np.concatenate(xs), np.concatenate(ys))
    return AffineModel(coef=coef, intercept=intercept, norm=norm)


def predict_affine(model: AffineModel, trace):
    """Predict the QoE series of a session with the affine model, in the
    model QoE scale and clamped to its [min, max]"""
    lo, hi = model.norm.qoe_scale
    y_norm = featurize(trace, model.norm).x @ model.coef + model.intercept
    return np.clip(model.norm.denormalize_qoe(y_norm), lo, hi)
