"""
Performance measures of continuous QoE predictions:

- LCC: Pearson linear correlation coefficient
- SROCC: Spearman rank order correlation coefficient (ties get their
  average rank)
- RMSE_n: root mean squared error normalized by the QoE scale range, in %
- OR: outage rate, the percentage of seconds where the absolute prediction
  error exceeds a fraction (`delta_fraction`) of the QoE scale range

and the pooling of continuous QoE series into overall QoE scores.

Correlations of constant series are undefined and returned as NaN; NaNs are
skipped (and counted) by the aggregations of :class:`MetricsReport`.
"""
import json
import warnings
from typing import List

import numpy as np
from scipy.stats import rankdata

from qoelstm.core.datasets import QoeWarning


MEASURES = ('lcc', 'srocc', 'rmse_n_percent', 'or_percent')

AGGREGATES = ('mean', 'median')

POOLINGS = ('mean', 'median')

DEFAULT_OR_DELTA = 0.10

# Subsets of sessions: without rebuffering (compression artifacts only) and
# with rebuffering:
SUBSETS = {
    'Vc': lambda session: not session['has_stalls'],
    'Vs': lambda session: session['has_stalls']
}


def _pair(a, b, min_length=1):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f'Series must be 1-dimensional and of equal length, '
                         f'found shapes {a.shape} and {b.shape}')
    if len(a) < min_length:
        raise ValueError(f'Series must have at least {min_length} elements')
    return a, b


def undefined_reason(a, b):
    """Return why the correlation of `a` and `b` is undefined, or '' if it
    is defined"""
    a, b = _pair(a, b, 2)
    names = [name for name, arr in (('first', a), ('second', b))
             if np.ptp(arr) == 0]
    if names:
        return f'constant {" and ".join(names)} series'
    return ''


def lcc(a, b):
    """Pearson linear correlation coefficient of `a` and `b`, or NaN if any
    of the two series is constant"""
    a, b = _pair(a, b, 2)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return np.nan
    a = a - a.mean()
    b = b - b.mean()
    ret = np.sum(a * b) / np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(min(1.0, max(-1.0, ret)))


def srocc(a, b):
    """Spearman rank order correlation coefficient of `a` and `b` (Pearson
    correlation of their average ranks), or NaN if any series is constant"""
    a, b = _pair(a, b, 2)
    return lcc(rankdata(a, method='average'), rankdata(b, method='average'))


def rmse_n(pred, truth, scale):
    """Root mean squared error, in percentage of the QoE scale range

    :param pred: the predicted QoE series
    :param truth: the ground truth QoE series
    :param scale: the (min, max) of the QoE scale
    """
    pred, truth = _pair(pred, truth)
    lo, hi = scale
    if not hi > lo:
        raise ValueError(f'Invalid QoE scale {scale}')
    err = pred - truth
    return float(100.0 * np.sqrt(np.mean(err * err)) / (hi - lo))


def outage_rate(pred, truth, scale, delta_fraction=DEFAULT_OR_DELTA):
    """Percentage of seconds where |pred - truth| exceeds
    `delta_fraction` * (scale max - scale min)

    :param pred: the predicted QoE series
    :param truth: the ground truth QoE series
    :param scale: the (min, max) of the QoE scale
    :param delta_fraction: the error threshold, as fraction of the scale
        range. Default: 0.1
    """
    pred, truth = _pair(pred, truth)
    if not delta_fraction > 0:
        raise ValueError(f'delta_fraction must be positive, found '
                         f'{delta_fraction}')
    lo, hi = scale
    if not hi > lo:
        raise ValueError(f'Invalid QoE scale {scale}')
    exceed = np.abs(pred - truth) > delta_fraction * (hi - lo)
    return float(100.0 * np.count_nonzero(exceed) / len(pred))


def pool(series, method='mean'):
    """Collapse a continuous QoE series into one overall score"""
    if method not in POOLINGS:
        raise ValueError(f'Pooling method must be in {POOLINGS}')
    series = np.asarray(series, dtype=float)
    return float(np.mean(series) if method == 'mean' else np.median(series))


def pool_overall(predictions, overall, method='mean'):
    """Correlate pooled continuous QoE series against overall QoE scores,
    across videos

    :param predictions: dict of video id -> QoE series
    :param overall: dict of video id -> overall QoE score. Videos not in
        both dicts are ignored
    :param method: 'mean' or 'median'

    :return: a dict with keys 'lcc', 'srocc', 'n' (number of videos) and
        'method'
    """
    ids = sorted(set(predictions) & set(overall))
    if len(ids) < 2:
        raise ValueError(f'At least 2 videos with both a QoE series and an '
                         f'overall score are required, found {len(ids)}')
    pooled = [pool(predictions[_], method) for _ in ids]
    truth = [float(overall[_]) for _ in ids]
    return {'method': method, 'n': len(ids), 'lcc': lcc(pooled, truth),
            'srocc': srocc(pooled, truth)}


def session_metrics(pred, truth, scale, delta_fraction=DEFAULT_OR_DELTA):
    """Return a dict with the four measures (:data:`MEASURES`) of one
    session, plus a 'notes' list explaining undefined values"""
    notes = []
    reason = undefined_reason(pred, truth)
    if reason:
        notes.append(f'lcc, srocc undefined: {reason}')
    return {
        'lcc': lcc(pred, truth),
        'srocc': srocc(pred, truth),
        'rmse_n_percent': rmse_n(pred, truth, scale),
        'or_percent': outage_rate(pred, truth, scale, delta_fraction),
        'notes': notes
    }


def nan_aggregate(values, method='mean'):
    """Return the tuple (aggregate, skipped) where aggregate is the mean or
    median of the non-NaN values (NaN if there are none) and skipped is the
    number of NaNs"""
    values = np.asarray(values, dtype=float)
    finite = ~np.isnan(values)
    skipped = int(len(values) - finite.sum())
    if not finite.any():
        return np.nan, skipped
    if method == 'mean':
        return float(np.mean(values[finite])), skipped
    if method == 'median':
        return float(np.median(values[finite])), skipped
    raise ValueError(f'Aggregate must be in {AGGREGATES}')


class MetricsReport:
    """Per-session measures of a model evaluated on one or more folds, with
    their mean and median aggregations over all sessions and over the
    subsets without ('Vc') and with ('Vs') rebuffering"""

    def __init__(self, model='LSTM-QoE', vqa_metric='',
                 or_delta=DEFAULT_OR_DELTA):
        self.model = model
        self.vqa_metric = vqa_metric
        self.or_delta = or_delta
        self.sessions: List[dict] = []
        self.pooling: List[dict] = []
        # run information (protocol, corpus, creation time...):
        self.info = {}

    def add_session(self, video_id, pred, truth, scale, fold=None,
                    has_stalls=False):
        row = {'video_id': video_id, 'fold': fold,
               'has_stalls': bool(has_stalls)}
        row.update(session_metrics(pred, truth, scale, self.or_delta))
        self.sessions.append(row)
        return row

    def aggregate(self, method='mean', subset=None):
        """Return a dict mapping each measure to its aggregated value, plus
        the keys 'sessions' (number of sessions) and 'skipped' (dict of
        measure -> number of undefined values skipped)

        :param method: 'mean' or 'median'
        :param subset: None (all sessions), 'Vc' or 'Vs'
        """
        sessions = self.sessions
        if subset is not None:
            sessions = [_ for _ in sessions if SUBSETS[subset](_)]
        ret = {'sessions': len(sessions), 'skipped': {}}
        for measure in MEASURES:
            val, skipped = nan_aggregate([_[measure] for _ in sessions],
                                         method)
            ret[measure] = val
            ret['skipped'][measure] = skipped
            if skipped and sessions:
                warnings.warn(f'{self.model}: {skipped} undefined {measure} '
                              f'value(s) skipped in the {method}', QoeWarning)
        return ret

    def to_dict(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', QoeWarning)
            return _nan_to_none({
                'model': self.model,
                'vqa_metric': self.vqa_metric,
                'or_delta_fraction': self.or_delta,
                'sessions': self.sessions,
                'aggregate': {m: self.aggregate(m) for m in AGGREGATES},
                'subsets': {s: {m: self.aggregate(m, s) for m in AGGREGATES}
                            for s in SUBSETS},
                'pooling': self.pooling,
                'info': self.info
            })

    def save(self, path, others=()):
        """Write this report (and optionally other reports, e.g. baselines)
        to a JSON file"""
        reports = [self] + list(others)
        with open(path, 'w', encoding='utf-8') as fp:
            json.dump({'reports': [_.to_dict() for _ in reports]}, fp,
                      indent=1, sort_keys=True)


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(_) for _ in obj]
    if isinstance(obj, float) and np.isnan(obj):
        return None
    return obj


def format_table(reports, method='mean', subset=None, sep=None):
    """Return the aligned text table of the given reports, one row per report
    with columns: model, VQA metric, LCC, SROCC, RMSE_n (%), OR (%)

    :param reports: iterable of :class:`MetricsReport`
    :param method: the aggregation ('mean' or 'median')
    :param subset: None (all sessions), 'Vc' or 'Vs'
    :param sep: the column separator or None (align columns with spaces)
    """
    header = ['model', 'VQA metric', 'LCC', 'SROCC', 'RMSE_n%', 'OR%']
    rows = [header]
    for report in reports:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', QoeWarning)
            agg = report.aggregate(method, subset)
        rows.append([report.model, report.vqa_metric or '-',
                     f'{agg["lcc"]:.3f}', f'{agg["srocc"]:.3f}',
                     f'{agg["rmse_n_percent"]:.2f}',
                     f'{agg["or_percent"]:.2f}'])
    if sep:
        return '\n'.join(sep.join(row) for row in rows)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return '\n'.join('  '.join(cell.ljust(w) if i < 2 else cell.rjust(w)
                               for i, (cell, w) in
                               enumerate(zip(row, widths)))
                     for row in rows)
