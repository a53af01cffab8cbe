"""
Module for fitting an LSTM network to training traces.

Training sessions are cut into sliding windows of `timestep` seconds
(stride 1). By default each window starts from the cell state carried from
the preceding seconds of its session, i.e. the state reached by running the
network statefully from the session start (the same state seen at inference,
where the network runs over the whole session). Carried states are computed
at the start of each epoch and are constants for backpropagation, which runs
only through the `timestep` seconds of the window. With
`window_state='zero'` windows start from the zero cell state instead.

The loss is the mean squared error between the network outputs and the QoE
targets normalized to [0, 1], over all seconds of all windows of a
mini-batch. Parameters are updated with Adam. Everything is deterministic
given the training seed.

.. seealso:: :mod:`qoelstm.core.lstm`, :mod:`qoelstm.core.model`
"""
import json
from dataclasses import dataclass, asdict, fields, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from qoelstm.core import lstm
from qoelstm.core.features import (FEATURE_NAMES, FeatureSeries, derive_norm,
                                   featurize)
from qoelstm.core.model import TrainedModel
from qoelstm.core.numerics import RNG_ALGORITHM, make_rng, spawn_seeds


WINDOW_STATES = ('carried', 'zero')


class TrainingError(ArithmeticError):
    """Raised when the training loss is not finite"""

    def __init__(self, msg, epoch, batch):
        super().__init__(f'{msg} (epoch {epoch}, batch {batch})')
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters"""
    timestep: int = 4
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    # early stop after `patience` epochs without a training loss improvement
    # greater than `min_delta` (0: never stop early)
    patience: int = 20
    min_delta: float = 0.0
    # initial cell state of the training windows (see module doc)
    window_state: str = 'carried'
    # learning rate multiplier applied after each epoch
    lr_decay: float = 1.0

    def __post_init__(self):
        if self.timestep < 1:
            raise ValueError(f'timestep must be >= 1, found {self.timestep}')
        if self.epochs < 0:
            raise ValueError(f'epochs must be >= 0, found {self.epochs}')
        if self.batch_size < 1:
            raise ValueError(f'batch_size must be >= 1, '
                             f'found {self.batch_size}')
        if not self.learning_rate > 0:
            raise ValueError(f'learning_rate must be positive, '
                             f'found {self.learning_rate}')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError('Adam betas must be in [0, 1)')
        if not self.epsilon > 0:
            raise ValueError('Adam epsilon must be positive')
        if self.patience < 0:
            raise ValueError('patience must be >= 0')
        if self.window_state not in WINDOW_STATES:
            raise ValueError(f'window_state must be in {WINDOW_STATES}, '
                             f'found {self.window_state!r}')
        if not 0 < self.lr_decay <= 1:
            raise ValueError(f'lr_decay must be in (0, 1], '
                             f'found {self.lr_decay}')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, dic):
        names = {_.name for _ in fields(cls)}
        unknown = set(dic) - names
        if unknown:
            raise ValueError(f'Unknown training config key(s): '
                             f'{sorted(unknown)}')
        return cls(**dic)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding='utf-8') as fp:
            return cls.from_dict(json.load(fp))


class Adam:
    """Adam optimizer updating a list of numpy arrays in place"""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 epsilon=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros_like(_) for _ in params]
        self.v = [np.zeros_like(_) for _ in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for param, grad, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * (grad * grad)
            param -= self.learning_rate * (m / bc1) / \
                (np.sqrt(v / bc2) + self.epsilon)


def make_windows(series: FeatureSeries, targets, timestep=4):
    """Cut a feature series and its (normalized) targets into sliding windows
    of `timestep` seconds, stride 1

    :param series: the :class:`qoelstm.core.features.FeatureSeries`
    :param targets: array of the same length of `series`
    :param timestep: the window length

    :return: the tuple (xs, ys) of numpy arrays of shape (N, timestep, m) and
        (N, timestep), where N = len(series) - timestep + 1
    """
    targets = np.asarray(targets, dtype=float)
    if len(targets) != len(series):
        raise ValueError(f'{series.video_id}: {len(targets)} targets for '
                         f'{len(series)} feature vectors')
    if len(series) < timestep:
        raise ValueError(f'{series.video_id}: series length {len(series)} '
                         f'is shorter than the timestep ({timestep})')
    # sliding_window_view appends the window axis last:
    xs = np.transpose(sliding_window_view(series.x, timestep, axis=0),
                      (0, 2, 1))
    ys = sliding_window_view(targets, timestep)
    return np.ascontiguousarray(xs), np.ascontiguousarray(ys)


def traces_windows(traces, norm, timestep=4):
    """Return the windows (xs, ys) of all traces, concatenated in the given
    trace order. Each trace must have ground truth QoE"""
    windows = TrainingWindows(traces, norm, timestep)
    return windows.xs, windows.ys


class TrainingWindows:
    """The sliding windows of a list of training traces, together with the
    feature series preceding them, needed to compute the state carried into
    each window

    :param traces: list of :class:`qoelstm.core.features.SessionTrace` with
        ground truth QoE
    :param norm: the :class:`qoelstm.core.features.NormSpec`
    :param timestep: the window length
    """

    def __init__(self, traces, norm, timestep=4):
        all_xs, all_ys, owners, starts, series = [], [], [], [], []
        for index, trace in enumerate(traces):
            if trace.ground_truth_qoe is None:
                raise ValueError(f'{trace.video_id}: no ground truth QoE, '
                                 f'cannot be used for training')
            feats = featurize(trace, norm)
            xs, ys = make_windows(feats, norm.normalize_qoe(
                trace.ground_truth_qoe), timestep)
            all_xs.append(xs)
            all_ys.append(ys)
            owners.append(np.full(len(xs), index))
            starts.append(np.arange(len(xs)))
            series.append(feats.x)
        if not series:
            raise ValueError('No training trace')
        self.xs, self.ys = np.concatenate(all_xs), np.concatenate(all_ys)
        self.owner = np.concatenate(owners)
        self.start = np.concatenate(starts)
        # the seconds preceding the last window start of each trace, zero
        # padded at the end to the same length:
        length = int(self.start.max())
        self.preceding = np.zeros((len(series), length, norm.inputs))
        for index, x in enumerate(series):
            head = x[:length]
            self.preceding[index, :len(head)] = head

    def __len__(self):
        return len(self.xs)

    def initial_states(self, net, window_state='carried'):
        """Return the initial :class:`qoelstm.core.lstm.CellState` of all
        windows (arrays of shape (N, d) for each layer), or None (zero
        state) if `window_state` is 'zero'"""
        if window_state == 'zero':
            return None
        states = lstm.sequence_states(net, self.preceding)
        return lstm.CellState(
            c=tuple(c[self.start, self.owner] for c, _ in states),
            h=tuple(h[self.start, self.owner] for _, h in states))

    @staticmethod
    def select(states, indices):
        """Return the initial states of the windows with the given indices"""
        if states is None:
            return None
        return lstm.CellState(c=tuple(_[indices] for _ in states.c),
                              h=tuple(_[indices] for _ in states.h))

    def loss(self, net, window_state='carried'):
        """Mean squared error of the network on all windows"""
        y_hats, _ = lstm.forward_windows(
            net, self.xs, self.initial_states(net, window_state))
        return float(np.mean((y_hats - self.ys) ** 2))


def fit(traces, net_config: lstm.NetworkConfig = None,
        train_config: TrainConfig = None, norm=None,
        features=FEATURE_NAMES, mode='full', provenance=None,
        info_output=None):
    """Train a new network on the given traces

    :param traces: list of :class:`qoelstm.core.features.SessionTrace` with
        ground truth QoE (the training fold)
    :param net_config: the :class:`qoelstm.core.lstm.NetworkConfig`. Its
        number of inputs is set to the number of features used. None: the
        default LSTM(2, 22)
    :param train_config: the :class:`TrainConfig` (None: defaults)
    :param norm: the :class:`qoelstm.core.features.NormSpec`, or None to
        derive it from `traces` with the given `features` and `mode`
    :param features: the feature subset (ignored if `norm` is given)
    :param mode: the feature mode (ignored if `norm` is given)
    :param provenance: optional dict of information (e.g., corpus, fold) to
        be stored in the model provenance
    :param info_output: text stream where to print training progress, or
        None (silent)

    :return: a :class:`qoelstm.core.model.TrainedModel`
    """
    traces = list(traces)
    if not traces:
        raise ValueError('Cannot train on an empty training set')
    train_config = train_config or TrainConfig()
    window_state = train_config.window_state
    if norm is None:
        norm = derive_norm(traces, features=features, mode=mode)
    net_config = replace(net_config or lstm.NetworkConfig(),
                         inputs=norm.inputs)

    windows = TrainingWindows(traces, norm, train_config.timestep)
    init_seed, shuffle_seed = spawn_seeds(train_config.seed, 2)
    net = lstm.init(net_config, make_rng(init_seed))
    shuffle_rng = make_rng(shuffle_seed)
    optimizer = Adam(net.parameters(), train_config.learning_rate,
                     train_config.beta1, train_config.beta2,
                     train_config.epsilon)

    initial_loss = windows.loss(net, window_state)
    if info_output:
        print(f'Training LSTM({net_config.layers}, {net_config.units}) on '
              f'{len(traces)} traces, {len(windows)} windows '
              f'({window_state} state). Initial loss: {initial_loss:.6g}',
              file=info_output)

    loss_curve = []
    best, stale = np.inf, 0
    n_win, batch_size = len(windows), train_config.batch_size
    for epoch in range(train_config.epochs):
        order = shuffle_rng.permutation(n_win) if train_config.shuffle \
            else np.arange(n_win)
        states = windows.initial_states(net, window_state)
        total = 0.0
        for batch, start in enumerate(range(0, n_win, batch_size)):
            idx = order[start: start + batch_size]
            grads, loss = lstm.backward_windows(
                net, windows.xs[idx], windows.ys[idx],
                windows.select(states, idx))
            if not np.isfinite(loss):
                raise TrainingError(f'Non-finite training loss {loss}',
                                    epoch, batch)
            optimizer.step(grads.parameters())
            total += loss * len(idx)
        optimizer.learning_rate *= train_config.lr_decay
        epoch_loss = total / n_win
        loss_curve.append(epoch_loss)
        if info_output and (epoch % 10 == 0 or
                            epoch == train_config.epochs - 1):
            print(f'  epoch {epoch:4d}  loss {epoch_loss:.6g}',
                  file=info_output)
        if epoch_loss < best - train_config.min_delta:
            best, stale = epoch_loss, 0
        else:
            stale += 1
            if train_config.patience and stale >= train_config.patience:
                if info_output:
                    print(f'  early stop at epoch {epoch}: no improvement '
                          f'in {stale} epochs', file=info_output)
                break

    final_loss = windows.loss(net, window_state)
    if not np.isfinite(final_loss):
        raise TrainingError(f'Non-finite training loss {final_loss}',
                            len(loss_curve), -1)
    prov = dict(provenance or {})
    prov.update({
        'train_ids': [_.video_id for _ in traces],
        'net_config': net_config.to_dict(),
        'train_config': train_config.to_dict(),
        'rng': RNG_ALGORITHM,
        'initial_loss': initial_loss,
        'final_loss': final_loss,
        'epochs_run': len(loss_curve),
        'loss_curve': loss_curve
    })
    return TrainedModel(network=net, norm=norm, provenance=prov)
