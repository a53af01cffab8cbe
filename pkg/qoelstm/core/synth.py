"""
Synthetic streaming sessions with a known, non-Markovian QoE oracle. Used to
verify training, prediction and metrics without subjective databases.

A synthetic corpus is the cross product of `n_contents` contents and
`n_patterns` playout patterns. A pattern fixes the quality switches (a
piecewise constant sequence of STSQ levels) and the rebuffering schedule; a
content shifts the STSQ levels by a constant offset.

The oracle QoE q(t), in [0, 100], is computed from the normalized STSQ s(t):
```
q(0) = 100 s(0)
playing:  q(t) = alpha q(t-1) + (1 - alpha) 100 min(s(t-K+1), ..., s(t))
stalled:  q(t) = max(0, q(t-1) - beta)
```
and, during the first K playing seconds after a stall, the playing update is
damped: q(t) = q(t-1) + rho (q_playing(t) - q(t-1)). The minimum over the
last K seconds makes q depend on more than (q(t-1), x(t)).
"""
import json
from dataclasses import dataclass, asdict, fields
from typing import Tuple

import numpy as np

from qoelstm.core.features import SessionTrace
from qoelstm.core.datasets import Corpus


QOE_SCALE = (0.0, 100.0)


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of a synthetic corpus and of its QoE oracle"""
    n_contents: int = 14
    n_patterns: int = 8
    duration: int = 120
    # rebuffering schedule:
    stall_pattern_fraction: float = 0.5
    max_stalls: int = 2
    stall_min: int = 2
    stall_max: int = 8
    stall_margin: int = 10
    # STSQ process:
    stsq_levels: Tuple[float, ...] = (0.3, 0.45, 0.6, 0.75, 0.9)
    switch_period: int = 10
    content_spread: float = 0.08
    # oracle constants:
    alpha: float = 0.7
    beta: float = 4.0
    depth: int = 5
    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'stsq_levels',
                           tuple(float(_) for _ in self.stsq_levels))
        if not 0 < self.alpha < 1:
            raise ValueError(f'alpha must be in (0, 1), found {self.alpha}')
        if not self.beta > 0:
            raise ValueError(f'beta must be positive, found {self.beta}')
        if not 0 < self.rho <= 1:
            raise ValueError(f'rho must be in (0, 1], found {self.rho}')
        if self.depth < 1:
            raise ValueError(f'depth (K) must be >= 1, found {self.depth}')
        if self.n_contents < 1 or self.n_patterns < 1 or self.duration < 1:
            raise ValueError('n_contents, n_patterns and duration must be '
                             '>= 1')
        if not 1 <= self.stall_min <= self.stall_max:
            raise ValueError('Stall durations must satisfy '
                             '1 <= stall_min <= stall_max')
        if not self.stsq_levels or \
                any(not 0 <= _ <= 1 for _ in self.stsq_levels):
            raise ValueError('STSQ levels must be in [0, 1]')
        if self.switch_period < 1:
            raise ValueError('switch_period must be >= 1')

    def to_dict(self):
        ret = asdict(self)
        ret['stsq_levels'] = list(self.stsq_levels)
        return ret

    @classmethod
    def from_dict(cls, dic):
        names = {_.name for _ in fields(cls)}
        unknown = set(dic) - names
        if unknown:
            raise ValueError(f'Unknown synthetic config key(s): '
                             f'{sorted(unknown)}')
        return cls(**dic)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding='utf-8') as fp:
            return cls.from_dict(json.load(fp))


def oracle_qoe(stsq_norm, playing, alpha=0.7, beta=4.0, depth=5, rho=0.5):
    """Compute the oracle QoE series (in [0, 100]) of a session

    :param stsq_norm: the STSQ series normalized to [0, 1]
    :param playing: the boolean playback series
    :param alpha: smoothing of the playing update, in (0, 1)
    :param beta: QoE drop per rebuffering second
    :param depth: the memory K (in seconds) of the min-pooled STSQ and of the
        slow recovery after a stall
    :param rho: damping factor of the playing update during the K seconds
        following a stall, in (0, 1]
    """
    stsq_norm = np.asarray(stsq_norm, dtype=float)
    playing = np.asarray(playing, dtype=bool)
    qoe = np.empty(len(stsq_norm))
    # the initial condition holds also for sessions starting with a stall:
    qoe[0] = 100.0 * stsq_norm[0]
    since_stall = None if playing[0] else 0
    for t in range(1, len(qoe)):
        prev = qoe[t - 1]
        if not playing[t]:
            qoe[t] = max(0.0, prev - beta)
            since_stall = 0
            continue
        target = 100.0 * stsq_norm[max(0, t - depth + 1): t + 1].min()
        update = alpha * prev + (1.0 - alpha) * target
        if since_stall is not None:
            since_stall += 1
            if since_stall <= depth:
                update = prev + rho * (update - prev)
        qoe[t] = min(100.0, max(0.0, update))
    return qoe


def _pattern_rng(config, pattern_idx):
    return np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(0, pattern_idx)))


def _content_rng(config, content_idx):
    return np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(1, content_idx)))


def _stall_rng(config, pattern_idx):
    return np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(2, pattern_idx)))


def stall_schedule(config: SynthConfig, pattern_idx):
    """Return the boolean playback series of the given playout pattern"""
    playing = np.ones(config.duration, dtype=bool)
    first_stall_pattern = round(config.n_patterns *
                                (1.0 - config.stall_pattern_fraction))
    if pattern_idx < first_stall_pattern or config.max_stalls < 1:
        return playing
    rng = _stall_rng(config, pattern_idx)
    start = config.stall_margin
    span = config.duration - 2 * config.stall_margin
    count = int(rng.integers(1, config.max_stalls + 1))
    if span < count * (config.stall_min + config.depth):
        return playing
    slot = span // count
    for k in range(count):
        length = int(rng.integers(config.stall_min,
                                  min(config.stall_max, slot - config.depth)
                                  + 1))
        offset = int(rng.integers(0, slot - length + 1))
        begin = start + k * slot + offset
        playing[begin: begin + length] = False
    return playing


def stsq_levels(config: SynthConfig, content_idx, pattern_idx):
    """Return the piecewise constant STSQ series, in [0, 1], of the given
    content and pattern"""
    rng = _pattern_rng(config, pattern_idx)
    n_segments = -(-config.duration // config.switch_period)
    levels = np.asarray(config.stsq_levels)[
        rng.integers(len(config.stsq_levels), size=n_segments)]
    offset = _content_rng(config, content_idx).uniform(
        -config.content_spread, config.content_spread)
    series = np.repeat(levels, config.switch_period)[:config.duration]
    return np.clip(series + offset, 0.0, 1.0)


def gen_trace(config: SynthConfig, content_idx, pattern_idx):
    """Generate the synthetic session of the given content and pattern, with
    its oracle ground truth QoE (on a [0, 100] scale) and overall QoE (the
    mean of the ground truth series)

    :return: a :class:`qoelstm.core.features.SessionTrace`
    """
    if not 0 <= content_idx < config.n_contents or \
            not 0 <= pattern_idx < config.n_patterns:
        raise ValueError(f'Content or pattern index out of range: '
                         f'({content_idx}, {pattern_idx})')
    stsq = stsq_levels(config, content_idx, pattern_idx)
    playing = stall_schedule(config, pattern_idx)
    qoe = oracle_qoe(stsq, playing, config.alpha, config.beta, config.depth,
                     config.rho)
    content_id, pattern_id = f'c{content_idx:02d}', f'p{pattern_idx:02d}'
    return SessionTrace(
        video_id=f'{content_id}_{pattern_id}',
        content_id=content_id,
        pattern_id=pattern_id,
        stsq=stsq,
        playing=playing,
        ground_truth_qoe=qoe,
        qoe_scale=QOE_SCALE,
        vqa_metric='synthetic',
        vqa_range=(0.0, 1.0),
        vqa_orientation='higher',
        overall_qoe=float(np.mean(qoe))
    )


def gen_corpus(config: SynthConfig):
    """Generate the n_contents x n_patterns synthetic corpus

    :return: a :class:`qoelstm.core.datasets.Corpus`
    """
    traces = [gen_trace(config, c_idx, p_idx)
              for c_idx in range(config.n_contents)
              for p_idx in range(config.n_patterns)]
    return Corpus(name=f'synthetic-{config.n_contents}x{config.n_patterns}',
                  traces=traces)
