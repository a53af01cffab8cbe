"""
Module for storing trained LSTM-QoE models and computing continuous QoE
predictions with them.

A model file is a versioned JSON document with the network parameters
(per gate, as nested row-major arrays), the normalization parameters of
features and QoE targets, and a provenance block (corpus, fold, configs,
training losses). Floats are written in their shortest round-trip
representation, so saving and loading a model is bit-exact.

.. seealso:: :mod:`qoelstm.core.training`
"""
import json
from os import listdir
from os.path import isdir, join

import numpy as np

from qoelstm.core.features import NormSpec, SessionTrace, featurize
from qoelstm.core.lstm import LstmNetwork, run_sequence
from qoelstm.core.numerics import ShapeError


FORMAT_VERSION = 1

MODEL_FILE_EXT = '.model.json'


class TrainedModel:
    """An :class:`qoelstm.core.lstm.LstmNetwork` with the normalization it
    was trained with, and provenance information"""

    def __init__(self, network: LstmNetwork, norm: NormSpec, provenance=None):
        if network.config.inputs != norm.inputs:
            raise ShapeError(f'Network inputs ({network.config.inputs}) != '
                             f'number of features ({norm.inputs})')
        self.network = network
        self.norm = norm
        self.provenance = dict(provenance or {})

    @property
    def name(self):
        return self.provenance.get('model', 'LSTM-QoE')

    def to_dict(self):
        ret = {'format_version': FORMAT_VERSION}
        ret.update(self.network.to_dict())
        ret['normalization'] = self.norm.to_dict()
        ret['provenance'] = self.provenance
        return ret

    @classmethod
    def from_dict(cls, dic):
        version = dic.get('format_version')
        if version != FORMAT_VERSION:
            raise ValueError(f'Unsupported model format version: {version}')
        return cls(LstmNetwork.from_dict(dic),
                   NormSpec.from_dict(dic['normalization']),
                   dic.get('provenance', {}))

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as fp:
            json.dump(self.to_dict(), fp, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as fp:
            try:
                return cls.from_dict(json.load(fp))
            except (KeyError, TypeError) as exc:
                raise ValueError(f'{path}: invalid model file ({exc})') \
                    from None


def model_paths(directory):
    """Return the sorted paths of all model files in `directory`"""
    if not isdir(directory):
        raise FileNotFoundError(f'Not a directory: {directory}')
    paths = sorted(join(directory, _) for _ in listdir(directory)
                   if _.endswith(MODEL_FILE_EXT))
    if not paths:
        raise FileNotFoundError(f'No model file (*{MODEL_FILE_EXT}) found in '
                                f'{directory}')
    return paths


def model_file_name(fold_index):
    return f'fold_{fold_index:03d}{MODEL_FILE_EXT}'


def predict_normalized(model: TrainedModel, trace: SessionTrace):
    """Return the raw network outputs (QoE normalized to [0, 1], not
    clamped) for each second of the trace"""
    series = featurize(trace, model.norm)
    if series.x.shape[1] != model.network.config.inputs:
        raise ShapeError(f'{trace.video_id}: {series.x.shape[1]} features, '
                         f'model expects {model.network.config.inputs}')
    y_hats, _ = run_sequence(model.network, series.x)
    return y_hats


def predict(model: TrainedModel, trace: SessionTrace):
    """Predict the continuous QoE of a session, one value per second, running
    the network statefully from the zero state. Predictions are expressed in
    the model QoE scale and clamped to its [min, max]

    :param model: the :class:`TrainedModel`
    :param trace: the :class:`qoelstm.core.features.SessionTrace`

    :return: a numpy array of length `trace.duration`
    """
    lo, hi = model.norm.qoe_scale
    qoe = model.norm.denormalize_qoe(predict_normalized(model, trace))
    return np.clip(qoe, lo, hi)


def traces_predictions(model: TrainedModel, traces):
    """Return a dict of video id -> predicted QoE series

    .. seealso:: :func:`predict`
    """
    return {trace.video_id: predict(model, trace) for trace in traces}
