"""
Module for computing the model features from streaming session traces.
Each second t of a session is described by the feature vector
x(t) = [STSQ(t), PI(t), T_R(t)] where:

- STSQ is the short time subjective quality, i.e. the score of an external
  video quality assessment (VQA) metric for the segment rendered at t,
  normalized to [0, 1] (1: best quality)
- PI is the playback indicator (1: playing, 0: rebuffering)
- T_R is the time elapsed since the last rebuffering event, normalized by the
  longest training session duration

Normalization parameters are held in a :class:`NormSpec`, derived from the
training traces only (see :func:`derive_norm`).

.. seealso:: :mod:`qoelstm.core.model`
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


FEATURE_NAMES = ('stsq', 'pi', 'tr')

# Feature subsets for ablation studies, keyed by their conventional letter:
ABLATION_SETS = {
    'a': ('stsq',),
    'b': ('pi',),
    'c': ('tr',),
    'd': ('stsq', 'pi'),
    'e': ('pi', 'tr'),
    'f': ('stsq', 'tr'),
    'g': ('stsq', 'pi', 'tr')
}

MODES = ('full', 'stsq_only')

# VQA metric orientations: 'higher' (the higher, the better, e.g. MS-SSIM) or
# 'lower' (distance-like metrics, e.g. STRRED, NIQE):
ORIENTATIONS = ('higher', 'lower')

# How T_R is defined before the first stall of a session:
TR_BEFORE_STALL = ('session_start', 'constant')


@dataclass(frozen=True, eq=False)
class SessionTrace:
    """Per-second record of a streaming session"""
    video_id: str
    stsq: np.ndarray
    playing: np.ndarray
    qoe_scale: Tuple[float, float]
    content_id: str = ''
    pattern_id: str = ''
    ground_truth_qoe: Optional[np.ndarray] = None
    vqa_metric: str = ''
    vqa_range: Optional[Tuple[float, float]] = None
    vqa_orientation: str = 'higher'
    overall_qoe: Optional[float] = None
    path: str = field(default='', compare=False)

    def __post_init__(self):
        stsq = np.asarray(self.stsq, dtype=float)
        playing = np.asarray(self.playing, dtype=bool)
        object.__setattr__(self, 'stsq', stsq)
        object.__setattr__(self, 'playing', playing)
        name = self.video_id
        if stsq.ndim != 1 or not len(stsq):
            raise ValueError(f'{name}: empty or non 1-dimensional STSQ series')
        if playing.shape != stsq.shape:
            raise ValueError(f'{name}: playback series length {len(playing)} '
                             f'!= STSQ series length {len(stsq)}')
        if not np.isfinite(stsq).all():
            raise ValueError(f'{name}: non-finite STSQ values')
        if self.ground_truth_qoe is not None:
            qoe = np.asarray(self.ground_truth_qoe, dtype=float)
            if qoe.shape != stsq.shape:
                raise ValueError(f'{name}: QoE series length {len(qoe)} '
                                 f'!= STSQ series length {len(stsq)}')
            object.__setattr__(self, 'ground_truth_qoe', qoe)
        qmin, qmax = (float(_) for _ in self.qoe_scale)
        if not qmin < qmax:
            raise ValueError(f'{name}: invalid QoE scale {self.qoe_scale}')
        object.__setattr__(self, 'qoe_scale', (qmin, qmax))
        if self.vqa_range is not None:
            object.__setattr__(self, 'vqa_range',
                               tuple(float(_) for _ in self.vqa_range))
        if self.vqa_orientation not in ORIENTATIONS:
            raise ValueError(f'{name}: VQA orientation must be in '
                             f'{ORIENTATIONS}, found {self.vqa_orientation!r}')

    @property
    def duration(self):
        """Session duration T, in seconds"""
        return len(self.stsq)

    @property
    def has_stalls(self):
        return not self.playing.all()

    @property
    def pattern_tags(self):
        """The set of playout pattern tags. Composite patterns join their tags
        with '+' (e.g. 'q3+s1': quality pattern q3 and stall pattern s1)"""
        return frozenset(_ for _ in self.pattern_id.split('+') if _)


@dataclass(frozen=True)
class NormSpec:
    """Affine normalization of features and QoE targets"""
    stsq_range: Tuple[float, float]
    t_max: float
    qoe_scale: Tuple[float, float]
    orientation: str = 'higher'
    features: Tuple[str, ...] = FEATURE_NAMES
    mode: str = 'full'
    tr_before_stall: str = 'session_start'
    vqa_metric: str = ''

    def __post_init__(self):
        lo, hi = self.stsq_range
        if not hi > lo:
            raise ValueError(f'Degenerate STSQ normalization range '
                             f'[{lo}, {hi}]')
        qlo, qhi = self.qoe_scale
        if not qhi > qlo:
            raise ValueError(f'Degenerate QoE scale [{qlo}, {qhi}]')
        if not self.t_max > 0:
            raise ValueError(f'T_max must be positive, found {self.t_max}')
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f'Orientation must be in {ORIENTATIONS}')
        if self.mode not in MODES:
            raise ValueError(f'Feature mode must be in {MODES}, '
                             f'found {self.mode!r}')
        if self.tr_before_stall not in TR_BEFORE_STALL:
            raise ValueError(f'tr_before_stall must be in {TR_BEFORE_STALL}')
        if not self.features or \
                any(_ not in FEATURE_NAMES for _ in self.features) or \
                len(set(self.features)) != len(self.features):
            raise ValueError(f'Invalid feature set {self.features}, '
                             f'choose a subset of {FEATURE_NAMES}')
        # canonical order:
        object.__setattr__(self, 'features', tuple(
            _ for _ in FEATURE_NAMES if _ in self.features))

    @property
    def inputs(self):
        """Dimension m of the feature vectors"""
        return len(self.features)

    def normalize_stsq(self, values):
        lo, hi = self.stsq_range
        ret = (np.asarray(values, dtype=float) - lo) / (hi - lo)
        return 1.0 - ret if self.orientation == 'lower' else ret

    def denormalize_stsq(self, values):
        lo, hi = self.stsq_range
        values = np.asarray(values, dtype=float)
        if self.orientation == 'lower':
            values = 1.0 - values
        return lo + values * (hi - lo)

    def normalize_qoe(self, values):
        lo, hi = self.qoe_scale
        return (np.asarray(values, dtype=float) - lo) / (hi - lo)

    def denormalize_qoe(self, values):
        lo, hi = self.qoe_scale
        return lo + np.asarray(values, dtype=float) * (hi - lo)

    def replace(self, **kwargs):
        dic = self.to_dict()
        dic.update(kwargs)
        return NormSpec.from_dict(dic)

    def to_dict(self):
        return {
            'stsq_range': list(self.stsq_range),
            't_max': self.t_max,
            'qoe_scale': list(self.qoe_scale),
            'orientation': self.orientation,
            'features': list(self.features),
            'mode': self.mode,
            'tr_before_stall': self.tr_before_stall,
            'vqa_metric': self.vqa_metric
        }

    @classmethod
    def from_dict(cls, dic):
        dic = dict(dic)
        for key in ('stsq_range', 'qoe_scale'):
            dic[key] = tuple(float(_) for _ in dic[key])
        dic['features'] = tuple(dic.get('features', FEATURE_NAMES))
        dic['t_max'] = float(dic['t_max'])
        return cls(**dic)


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    """Model-ready feature vectors of a session: x has shape (T, m), with
    columns in the order given by `norm.features`"""
    x: np.ndarray
    norm: NormSpec
    video_id: str = ''

    def __len__(self):
        return len(self.x)

    def column(self, name):
        return self.x[:, self.norm.features.index(name)]


def compute_pi(playing):
    """Return the playback indicator series: 1 (playing) or 0 (rebuffering)

    :param playing: boolean array-like, one element per second
    """
    return np.asarray(playing, dtype=bool).astype(float)


def compute_tr(playing, before_first_stall='session_start', t_max=None):
    """Return the time elapsed (in seconds) since the last rebuffering event,
    for each second of a session. T_R(t) is 0 during a rebuffering second
    and increases by 1 each playing second afterwards

    :param playing: boolean array-like, one element per second
    :param before_first_stall: how T_R is defined before the first stall.
        'session_start' (the default): the session start is the reference
        event, so T_R(t) = t+1. 'constant': T_R(t) = `t_max`
    :param t_max: the constant used when `before_first_stall` is 'constant'
    """
    playing = np.asarray(playing, dtype=bool)
    if playing.ndim != 1 or not len(playing):
        raise ValueError('Expected a non-empty 1-dimensional playback series')
    if before_first_stall not in TR_BEFORE_STALL:
        raise ValueError(f'"before_first_stall" must be in {TR_BEFORE_STALL}')
    if before_first_stall == 'constant' and t_max is None:
        raise ValueError('"t_max" is required when T_R before the first '
                         'stall is constant')
    ret = np.empty(len(playing))
    elapsed, stalled = 0, False
    for t, play in enumerate(playing):
        if not play:
            elapsed, stalled = 0, True
        else:
            elapsed += 1
        if stalled or before_first_stall == 'session_start':
            ret[t] = elapsed
        else:
            ret[t] = t_max
    return ret


def derive_norm(traces, features=FEATURE_NAMES, mode='full',
                tr_before_stall='session_start', stsq_range=None):
    """Derive the normalization parameters from the given training traces

    :param traces: iterable of :class:`SessionTrace` (training set only)
    :param features: the subset of :data:`FEATURE_NAMES` to use
    :param mode: 'full' or 'stsq_only' (see :func:`featurize`)
    :param tr_before_stall: see :func:`compute_tr`
    :param stsq_range: the (min, max) of the STSQ values or None. If None,
        the range declared by the traces VQA metric is used when all traces
        declare the same one, otherwise the min and max of all training
        STSQ values

    :return: a :class:`NormSpec`
    """
    traces = list(traces)
    if not traces:
        raise ValueError('Cannot derive normalization from an empty set')

    def _unique(attr):
        values = set(getattr(_, attr) for _ in traces)
        if len(values) > 1:
            raise ValueError(f'Training traces have different {attr}: '
                             f'{sorted(str(_) for _ in values)}')
        return values.pop()

    qoe_scale = _unique('qoe_scale')
    orientation = _unique('vqa_orientation')
    vqa_metric = _unique('vqa_metric')
    if stsq_range is None:
        declared = set(_.vqa_range for _ in traces)
        if len(declared) == 1:
            stsq_range = declared.pop()
    if stsq_range is None:
        stsq_range = (min(float(_.stsq.min()) for _ in traces),
                      max(float(_.stsq.max()) for _ in traces))
    return NormSpec(stsq_range=tuple(float(_) for _ in stsq_range),
                    t_max=float(max(_.duration for _ in traces)),
                    qoe_scale=qoe_scale,
                    orientation=orientation,
                    features=tuple(features),
                    mode=mode,
                    tr_before_stall=tr_before_stall,
                    vqa_metric=vqa_metric)


def featurize(trace: SessionTrace, norm: NormSpec = None, mode=None):
    """Compute the normalized feature series of the given trace

    :param trace: a :class:`SessionTrace`
    :param norm: the :class:`NormSpec`, or None to derive it from `trace`
        itself (see :func:`derive_norm`)
    :param mode: 'full' or 'stsq_only', or None to use `norm.mode`. In
        'stsq_only' mode the rebuffering information is discarded: the
        playback indicator is always 1 and T_R is computed as if the session
        was always playing

    :return: a :class:`FeatureSeries`
    """
    if norm is None:
        norm = derive_norm([trace], mode=mode or 'full')
    elif mode is not None and mode != norm.mode:
        norm = norm.replace(mode=mode)
    playing = trace.playing
    if norm.mode == 'stsq_only':
        playing = np.ones(trace.duration, dtype=bool)
    columns = {
        'stsq': norm.normalize_stsq(trace.stsq),
        'pi': compute_pi(playing),
        'tr': compute_tr(playing, norm.tr_before_stall,
                         norm.t_max) / norm.t_max
    }
    x = np.column_stack([columns[_] for _ in norm.features])
    return FeatureSeries(x=x, norm=norm, video_id=trace.video_id)


def traces_features(traces, norm: NormSpec):
    """Compute the feature series of all traces

    :param traces: iterable of :class:`SessionTrace`
    :param norm: the :class:`NormSpec`

    :return: a list of :class:`FeatureSeries`

    .. seealso:: :func:`featurize`
    """
    return [featurize(trace, norm) for trace in traces]
