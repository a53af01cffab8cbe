"""
Module for reading and writing trace corpora and for realizing the database
evaluation protocols as explicit split plans (lists of training/test video
identifiers).

A corpus is a directory with a JSON manifest (:data:`MANIFEST_NAME`) listing
the per-video metadata and the path of each trace CSV file, relative to the
manifest. Trace CSV files have header `t,stsq,playing,qoe` (the `qoe` column
can be empty or missing for inference-only traces).

.. seealso:: :mod:`qoelstm.core.features`
"""
import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from os import makedirs
from os.path import isdir, join, dirname, abspath, isfile
from typing import List, Tuple

import numpy as np

from qoelstm.core.features import SessionTrace


MANIFEST_NAME = 'corpus.json'
MANIFEST_VERSION = 1

CSV_HEADER = ('t', 'stsq', 'playing', 'qoe')

PROTOCOLS = ('netflix_style', 'lfovia_style', 'leave_p_out',
             'random_fraction', 'fixed_fraction_80_20')

# leave-p-out exclusion rules (see `split_leave_p_out`):
LEAVE_P_OUT_RULES = ('content', 'pattern', 'content_or_pattern')


class QoeWarning(UserWarning):
    """Warning issued for recoverable anomalies (e.g., degenerate folds)"""


@dataclass(eq=False)
class Corpus:
    """A named collection of session traces with unique video identifiers"""
    name: str
    traces: List[SessionTrace]

    def __post_init__(self):
        self._by_id = {}
        for trace in self.traces:
            if trace.video_id in self._by_id:
                raise ValueError(f'Duplicated video id in corpus '
                                 f'"{self.name}": {trace.video_id}')
            self._by_id[trace.video_id] = trace

    def __len__(self):
        return len(self.traces)

    @property
    def ids(self):
        return [_.video_id for _ in self.traces]

    def __getitem__(self, video_id):
        try:
            return self._by_id[video_id]
        except KeyError:
            raise KeyError(f'Video "{video_id}" not found in corpus '
                           f'"{self.name}"') from None

    def select(self, video_ids):
        """Return the traces of the given video identifiers, in that order"""
        return [self[_] for _ in video_ids]


###########
# File I/O
###########


def read_trace_csv(path):
    """Read a trace CSV file and return the tuple (stsq, playing, qoe),
    where qoe is None if the file has no (or an empty) 'qoe' column"""
    stsq, playing, qoe = [], [], []
    with open(path, newline='', encoding='utf-8') as csvfile:
        reader = csv.DictReader(csvfile)
        missing = {'t', 'stsq', 'playing'} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f'{path}: missing column(s) {sorted(missing)}')
        for lineno, row in enumerate(reader, 2):
            try:
                if int(row['t']) != lineno - 2:
                    raise ValueError(f'expected t={lineno - 2}, '
                                     f'found {row["t"]}')
                stsq.append(float(row['stsq']))
                playing.append(_parse_bool(row['playing']))
                qoe.append((row.get('qoe') or '').strip())
            except ValueError as verr:
                raise ValueError(f'{path}, line {lineno}: {verr}') from None
    if all(qoe):
        qoe = np.array(qoe, dtype=float)
    elif not any(qoe):
        qoe = None
    else:
        raise ValueError(f'{path}: column "qoe" is partially empty')
    return np.array(stsq), np.array(playing, dtype=bool), qoe


def _parse_bool(value):
    val = value.strip().lower()
    if val in ('1', 'true'):
        return True
    if val in ('0', 'false'):
        return False
    raise ValueError(f'invalid playback value "{value}"')


def write_trace_csv(path, stsq, playing, qoe=None):
    """Write a trace CSV file. Floats are written with the shortest
    representation that reads back to the same value"""
    with open(path, 'w', newline='', encoding='utf-8') as csvfile:
        writer = csv.writer(csvfile)
        writer.writerow(CSV_HEADER)
        for t, (val, play) in enumerate(zip(stsq, playing)):
            writer.writerow([t, repr(float(val)), int(bool(play)),
                             '' if qoe is None else repr(float(qoe[t]))])


def load_corpus(path):
    """Load a corpus from its manifest

    :param path: the path to the corpus directory, or to its JSON manifest

    :return: a :class:`Corpus`
    """
    manifest_path = join(path, MANIFEST_NAME) if isdir(path) else path
    if not isfile(manifest_path):
        raise FileNotFoundError(f'Corpus manifest not found: {manifest_path}')
    with open(manifest_path, encoding='utf-8') as fp:
        manifest = json.load(fp)
    root = dirname(abspath(manifest_path))
    traces = []
    for entry in manifest.get('videos', []):
        try:
            video_id = entry['video_id']
            trace_path = join(root, entry['path'])
            qoe_scale = tuple(entry['qoe_scale'])
        except KeyError as kerr:
            raise ValueError(f'{manifest_path}: video entry without '
                             f'{kerr}') from None
        stsq, playing, qoe = read_trace_csv(trace_path)
        vqa_range = entry.get('vqa_range')
        traces.append(SessionTrace(
            video_id=video_id,
            stsq=stsq,
            playing=playing,
            ground_truth_qoe=qoe,
            qoe_scale=qoe_scale,
            content_id=entry.get('content_id', ''),
            pattern_id=entry.get('pattern_id', ''),
            vqa_metric=entry.get('vqa_metric', ''),
            vqa_range=None if vqa_range is None else tuple(vqa_range),
            vqa_orientation=entry.get('vqa_orientation', 'higher'),
            overall_qoe=entry.get('overall_qoe'),
            path=trace_path
        ))
    return Corpus(name=manifest.get('name', ''), traces=traces)


def save_corpus(corpus: Corpus, directory):
    """Write all traces of the corpus as CSV files in `directory`, together
    with the corpus manifest. Return the manifest path"""
    makedirs(directory, exist_ok=True)
    videos = []
    for trace in corpus.traces:
        fname = f'{trace.video_id}.csv'
        write_trace_csv(join(directory, fname), trace.stsq, trace.playing,
                        trace.ground_truth_qoe)
        entry = {
            'video_id': trace.video_id,
            'path': fname,
            'content_id': trace.content_id,
            'pattern_id': trace.pattern_id,
            'vqa_metric': trace.vqa_metric,
            'vqa_range': None if trace.vqa_range is None
            else list(trace.vqa_range),
            'vqa_orientation': trace.vqa_orientation,
            'qoe_scale': list(trace.qoe_scale)
        }
        if trace.overall_qoe is not None:
            entry['overall_qoe'] = trace.overall_qoe
        videos.append(entry)
    manifest_path = join(directory, MANIFEST_NAME)
    with open(manifest_path, 'w', encoding='utf-8') as fp:
        json.dump({'format_version': MANIFEST_VERSION, 'name': corpus.name,
                   'videos': videos}, fp, indent=1)
    return manifest_path


##############
# Split plans
##############


@dataclass(frozen=True)
class Fold:
    """A (train set, test set) pair of video identifiers"""
    index: int
    train_ids: Tuple[str, ...]
    test_ids: Tuple[str, ...]

    @property
    def degenerate(self):
        """True if the training set is empty"""
        return not self.train_ids

    def to_dict(self):
        return {'index': self.index, 'train_ids': list(self.train_ids),
                'test_ids': list(self.test_ids)}


@dataclass(frozen=True)
class SplitPlan:
    """The list of folds realizing an evaluation protocol on a corpus"""
    protocol: str
    folds: Tuple[Fold, ...]
    params: dict = field(default_factory=dict)

    def usable_folds(self, info_output=None):
        """Return the non-degenerate folds, warning about those skipped"""
        ret = []
        for fold in self.folds:
            if fold.degenerate:
                msg = (f'Skipping fold {fold.index} (test videos: '
                       f'{", ".join(fold.test_ids)}): empty training set')
                warnings.warn(msg, QoeWarning)
                if info_output:
                    print(msg, file=info_output)
                continue
            ret.append(fold)
        return ret

    def to_dict(self):
        return {'protocol': self.protocol, 'params': dict(self.params),
                'folds': [_.to_dict() for _ in self.folds]}

    @classmethod
    def from_dict(cls, dic):
        return cls(protocol=dic['protocol'], params=dic.get('params', {}),
                   folds=tuple(Fold(index=int(_['index']),
                                    train_ids=tuple(_['train_ids']),
                                    test_ids=tuple(_['test_ids']))
                               for _ in dic['folds']))

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as fp:
            json.dump(self.to_dict(), fp, indent=1)

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as fp:
            return cls.from_dict(json.load(fp))


def _check_metadata(corpus, content=True, pattern=True):
    for trace in corpus.traces:
        if (content and not trace.content_id) or \
                (pattern and not trace.pattern_tags):
            raise ValueError(f'Video "{trace.video_id}" has no content or '
                             f'pattern identifier')


def _shares_content(trace1, trace2):
    return trace1.content_id == trace2.content_id


def _shares_pattern(trace1, trace2):
    return bool(trace1.pattern_tags & trace2.pattern_tags)


def _shares_content_or_pattern(trace1, trace2):
    return _shares_content(trace1, trace2) or \
        _shares_pattern(trace1, trace2)


EXCLUSION_RULES = {
    'content': _shares_content,
    'pattern': _shares_pattern,
    'content_or_pattern': _shares_content_or_pattern
}


def _leave_one_out(corpus, protocol, excluded):
    folds = []
    for index, test in enumerate(corpus.traces):
        train = tuple(_.video_id for _ in corpus.traces
                      if _ is not test and not excluded(test, _))
        folds.append(Fold(index, train, (test.video_id,)))
    return SplitPlan(protocol=protocol, folds=tuple(folds))


def split_netflix(corpus: Corpus):
    """One fold per video: the training set excludes all videos sharing the
    test video content or playout pattern (including the test video itself)
    """
    _check_metadata(corpus)
    return _leave_one_out(corpus, 'netflix_style', _shares_content_or_pattern)


def split_lfovia(corpus: Corpus):
    """One fold per video: the training set excludes all videos sharing the
    test video playout pattern (including the test video itself)
    """
    _check_metadata(corpus, content=False)
    return _leave_one_out(corpus, 'lfovia_style', _shares_pattern)


def split_leave_p_out(corpus: Corpus, p=5, rule='content'):
    """Leave-p-out cross validation. Videos sorted by (content, pattern, id)
    are partitioned into consecutive test groups of `p` videos (the last
    group can be smaller), so that with p equal to the number of videos per
    content each group is a content. The training set of each group excludes
    the test videos and every video which shares with any test video:

    - its content (rule='content', the default)
    - its playout pattern (rule='pattern')
    - its content or its playout pattern (rule='content_or_pattern')

    :param corpus: the :class:`Corpus`
    :param p: the test group size
    :param rule: the exclusion rule, see above
    """
    if rule not in LEAVE_P_OUT_RULES:
        raise ValueError(f'"rule" must be in {LEAVE_P_OUT_RULES}')
    if not 1 <= p <= len(corpus):
        raise ValueError(f'p must be in [1, {len(corpus)}], found {p}')
    _check_metadata(corpus, content=rule != 'pattern',
                    pattern=rule != 'content')
    excluded = EXCLUSION_RULES[rule]
    ordered = sorted(corpus.traces,
                     key=lambda _: (_.content_id, _.pattern_id, _.video_id))
    folds = []
    for index, start in enumerate(range(0, len(ordered), p)):
        test = ordered[start: start + p]
        train = tuple(_.video_id for _ in corpus.traces
                      if all(_ is not tst and not excluded(tst, _)
                             for tst in test))
        folds.append(Fold(index, train, tuple(_.video_id for _ in test)))
    return SplitPlan(protocol='leave_p_out', folds=tuple(folds),
                     params={'p': p, 'rule': rule})


def round_half_up(value):
    return int(math.floor(value + 0.5))


def split_random(corpus: Corpus, fraction=0.8, rng=None, mode='per_video'):
    """Random splits

    :param corpus: the :class:`Corpus`
    :param fraction: the training fraction, in (0, 1)
    :param rng: a numpy random Generator
    :param mode: 'per_video' (the default): one fold per video, whose
        training set is a random round(fraction * (N-1)) of the other videos.
        'fixed': a single fold with a random round(fraction * N) / rest
        partition (at least one video on each side)
    """
    if not 0 < fraction < 1:
        raise ValueError(f'fraction must be in (0, 1), found {fraction}')
    if rng is None:
        raise ValueError('A random generator is required')
    ids = corpus.ids
    folds = []
    if mode == 'per_video':
        for index, test_id in enumerate(ids):
            others = [_ for _ in ids if _ != test_id]
            size = round_half_up(fraction * len(others))
            chosen = rng.permutation(len(others))[:size]
            folds.append(Fold(index, tuple(sorted(others[_] for _ in chosen)),
                              (test_id,)))
        protocol = 'random_fraction'
    elif mode == 'fixed':
        if len(ids) < 2:
            raise ValueError('A fixed split requires at least 2 videos')
        size = min(max(round_half_up(fraction * len(ids)), 1), len(ids) - 1)
        perm = rng.permutation(len(ids))
        folds.append(Fold(0, tuple(sorted(ids[_] for _ in perm[:size])),
                          tuple(sorted(ids[_] for _ in perm[size:]))))
        protocol = 'fixed_fraction_80_20'
    else:
        raise ValueError(f'Invalid mode "{mode}"')
    return SplitPlan(protocol=protocol, folds=tuple(folds),
                     params={'fraction': fraction})


def make_plan(corpus: Corpus, protocol, rng=None, p=5, rule='content',
              fraction=None):
    """Return the :class:`SplitPlan` of the given protocol (one of
    :data:`PROTOCOLS`). `rng` is required by the random protocols, `p` and
    `rule` are used by 'leave_p_out' only"""
    if protocol == 'netflix_style':
        return split_netflix(corpus)
    if protocol == 'lfovia_style':
        return split_lfovia(corpus)
    if protocol == 'leave_p_out':
        return split_leave_p_out(corpus, p, rule)
    if protocol == 'random_fraction':
        return split_random(corpus, fraction or 0.8, rng, 'per_video')
    if protocol == 'fixed_fraction_80_20':
        return split_random(corpus, fraction or 0.8, rng, 'fixed')
    raise ValueError(f'Invalid protocol "{protocol}", choose among '
                     f'{PROTOCOLS}')


def find_leaks(plan: SplitPlan, corpus: Corpus):
    """Return the list of (fold index, train id, test id) violating the
    exclusion rule of the plan protocol (empty list: no leakage). Train and
    test sets are also checked to be disjoint for all protocols"""
    rule = None
    if plan.protocol == 'netflix_style':
        rule = _shares_content_or_pattern
    elif plan.protocol == 'lfovia_style':
        rule = _shares_pattern
    elif plan.protocol == 'leave_p_out':
        rule = EXCLUSION_RULES[plan.params.get('rule', 'content')]
    leaks = []
    for fold in plan.folds:
        for train_id in fold.train_ids:
            for test_id in fold.test_ids:
                if train_id == test_id or (
                        rule is not None and
                        rule(corpus[train_id], corpus[test_id])):
                    leaks.append((fold.index, train_id, test_id))
    return leaks
