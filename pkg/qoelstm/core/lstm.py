"""
Stacked LSTM network with a linear output head, denoted LSTM(l, d): l layers
of d units each. The network maps the per-second feature vector x(t) and the
cell state carried from the previous second to the predicted QoE y(t).

Each layer k receives the input u (the feature vector for the first layer,
the hidden state of layer k-1 otherwise) and computes, with the standard
four-gate LSTM cell with forget gate and no peepholes:
```
i = sigmoid(W_i u + U_i h_prev + b_i)    input gate
f = sigmoid(W_f u + U_f h_prev + b_f)    forget gate
g = tanh(W_g u + U_g h_prev + b_g)       candidate
o = sigmoid(W_o u + U_o h_prev + b_o)    output gate
c = f * c_prev + i * g
h = o * tanh(c)
```
and the output is `y = w . h_top + b`.

Gate parameters of a layer are stored stacked (rows ordered as i, f, g, o) so
that training can evaluate all gates with one matrix product. Per gate views
are available via :meth:`LstmLayerWeights.gate`.

.. seealso:: :mod:`qoelstm.core.training`
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from qoelstm.core.numerics import (DTYPE, ShapeError, matvec, sigmoid, tanh,
                                   orthogonal, glorot_uniform)


GATES = ('i', 'f', 'g', 'o')


@dataclass(frozen=True)
class NetworkConfig:
    """Shape of an LSTM(l, d) network with m input features and 1 output"""
    layers: int = 2
    units: int = 22
    inputs: int = 3

    def __post_init__(self):
        for name in ('layers', 'units', 'inputs'):
            val = getattr(self, name)
            if isinstance(val, bool) or \
                    not isinstance(val, (int, np.integer)) or val < 1:
                raise ValueError(f'NetworkConfig.{name} must be an integer '
                                 f'>= 1, found {val!r}')

    def layer_inputs(self, index):
        """Return the input dimension of the layer at the given index"""
        return self.inputs if index == 0 else self.units

    @property
    def n_params(self):
        """Total number of trainable parameters: 4d(in + d + 1) per layer,
        plus d + 1 for the output head"""
        d = self.units
        return sum(4 * d * (self.layer_inputs(k) + d + 1)
                   for k in range(self.layers)) + d + 1

    def to_dict(self):
        return {'l': self.layers, 'd': self.units, 'm': self.inputs}

    @classmethod
    def from_dict(cls, dic):
        return cls(layers=int(dic['l']), units=int(dic['d']),
                   inputs=int(dic['m']))


class LstmLayerWeights:
    """Parameters of one LSTM layer. W: (4d, n_in), U: (4d, d), b: (4d,)"""

    __slots__ = ('W', 'U', 'b')

    def __init__(self, W, U, b):  # noqa
        self.W = np.asarray(W, dtype=DTYPE)
        self.U = np.asarray(U, dtype=DTYPE)
        self.b = np.asarray(b, dtype=DTYPE)
        units = self.U.shape[1] if self.U.ndim == 2 else -1
        if self.U.shape != (4 * units, units) or self.W.ndim != 2 or \
                self.W.shape[0] != 4 * units or self.b.shape != (4 * units,):
            raise ShapeError(f'Inconsistent LSTM layer shapes: '
                             f'W {self.W.shape}, U {self.U.shape}, '
                             f'b {self.b.shape}')

    @property
    def units(self):
        return self.U.shape[1]

    def gate(self, name):
        """Return the tuple (W_g, U_g, b_g) of views for the given gate
        ('i', 'f', 'g' or 'o')"""
        d = self.units
        k = GATES.index(name)
        rows = slice(k * d, (k + 1) * d)
        return self.W[rows], self.U[rows], self.b[rows]

    def arrays(self):
        return [self.W, self.U, self.b]

    def to_dict(self):
        ret = {}
        for name in GATES:
            w_g, u_g, b_g = self.gate(name)
            ret[f'W_{name}'] = w_g.tolist()
            ret[f'U_{name}'] = u_g.tolist()
            ret[f'b_{name}'] = b_g.tolist()
        return ret

    @classmethod
    def from_dict(cls, dic):
        try:
            return cls(np.vstack([dic[f'W_{g}'] for g in GATES]),
                       np.vstack([dic[f'U_{g}'] for g in GATES]),
                       np.concatenate([dic[f'b_{g}'] for g in GATES]))
        except KeyError as kerr:
            raise ValueError(f'Missing LSTM layer parameter: {kerr}') from None


class OutputHead:
    """Linear map y = w . h + b from the top hidden state to the QoE.
    The bias is stored as an array of shape (1,) so that it can be updated
    in place like any other parameter"""

    __slots__ = ('w', 'b')

    def __init__(self, w, b):
        self.w = np.asarray(w, dtype=DTYPE)
        self.b = np.asarray(b, dtype=DTYPE).reshape((1,))

    @property
    def bias(self):
        return float(self.b[0])

    def arrays(self):
        return [self.w, self.b]

    def to_dict(self):
        return {'w': self.w.tolist(), 'b': self.bias}

    @classmethod
    def from_dict(cls, dic):
        return cls(dic['w'], dic['b'])


@dataclass(frozen=True)
class CellState:
    """Cell (c) and hidden (h) vectors of each layer"""
    c: tuple = field(default_factory=tuple)
    h: tuple = field(default_factory=tuple)

    @classmethod
    def zeros(cls, config: NetworkConfig):
        shape = (config.units,)
        return cls(c=tuple(np.zeros(shape) for _ in range(config.layers)),
                   h=tuple(np.zeros(shape) for _ in range(config.layers)))


class LstmNetwork:
    """LSTM(l, d) network: a list of l :class:`LstmLayerWeights` and an
    :class:`OutputHead`"""

    def __init__(self, config: NetworkConfig, layers: List[LstmLayerWeights],
                 head: OutputHead):
        if len(layers) != config.layers:
            raise ShapeError(f'Expected {config.layers} layers, '
                             f'found {len(layers)}')
        for k, layer in enumerate(layers):
            expected = (4 * config.units, config.layer_inputs(k))
            if layer.W.shape != expected or layer.units != config.units:
                raise ShapeError(f'Layer {k}: expected W of shape {expected} '
                                 f'and {config.units} units, found '
                                 f'{layer.W.shape} and {layer.units} units')
        if head.w.shape != (config.units,):
            raise ShapeError(f'Output head: expected w of shape '
                             f'({config.units},), found {head.w.shape}')
        self.config = config
        self.layers = list(layers)
        self.head = head

    def parameters(self):
        """Return all parameter arrays (not copies) in a fixed order:
        W, U, b of each layer, then the head's w and b"""
        ret = []
        for layer in self.layers:
            ret.extend(layer.arrays())
        ret.extend(self.head.arrays())
        return ret

    @property
    def n_params(self):
        return sum(arr.size for arr in self.parameters())

    def copy(self):
        return LstmNetwork(self.config,
                           [LstmLayerWeights(lyr.W.copy(), lyr.U.copy(),
                                             lyr.b.copy())
                            for lyr in self.layers],
                           OutputHead(self.head.w.copy(), self.head.b.copy()))

    def zeros_like(self):
        """Return a network with the same shapes and all parameters zero"""
        ret = self.copy()
        for arr in ret.parameters():
            arr[...] = 0.0
        return ret

    def to_dict(self):
        return {
            'config': self.config.to_dict(),
            'layers': [layer.to_dict() for layer in self.layers],
            'head': self.head.to_dict()
        }

    @classmethod
    def from_dict(cls, dic):
        return cls(NetworkConfig.from_dict(dic['config']),
                   [LstmLayerWeights.from_dict(_) for _ in dic['layers']],
                   OutputHead.from_dict(dic['head']))


def init(config: NetworkConfig, rng):
    """Return a new randomly initialized network

    Input matrices W_g are drawn from U(-a, a) with a = sqrt(6/(fan_in +
    fan_out)), recurrent matrices U_g are random orthogonal matrices, biases
    are zero except the forget gate bias, which is 1. The head weights are
    drawn as the input matrices, the head bias is zero.

    :param config: a :class:`NetworkConfig`
    :param rng: a numpy random Generator (see
        :func:`qoelstm.core.numerics.make_rng`). The network is fully
        determined by the generator state
    """
    d = config.units
    layers = []
    for k in range(config.layers):
        n_in = config.layer_inputs(k)
        w_blocks, u_blocks = [], []
        for _ in GATES:
            w_blocks.append(glorot_uniform(d, n_in, rng))
            u_blocks.append(orthogonal(d, rng))
        bias = np.zeros(4 * d)
        bias[d: 2 * d] = 1.0  # forget gate
        layers.append(LstmLayerWeights(np.vstack(w_blocks),
                                       np.vstack(u_blocks), bias))
    head = OutputHead(glorot_uniform(1, d, rng)[0], 0.0)
    return LstmNetwork(config, layers, head)


def _check_input(x, inputs):
    x = np.asarray(x, dtype=DTYPE)
    if x.shape != (inputs,):
        raise ShapeError(f'Expected a feature vector of shape ({inputs},), '
                         f'found {x.shape}')
    if not np.isfinite(x).all():
        raise ValueError(f'Non-finite feature vector: {x.tolist()}')
    return x


def step(net: LstmNetwork, x, state: CellState = None):
    """Advance the network by one second

    :param net: the :class:`LstmNetwork` (not modified)
    :param x: the feature vector x(t), array-like of length m
    :param state: the :class:`CellState` after t-1, or None (zero state)

    :return: the tuple (y_hat, new_state)
    """
    u = _check_input(x, net.config.inputs)
    if state is None:
        state = CellState.zeros(net.config)
    d = net.config.units
    cells, hiddens = [], []
    for k, layer in enumerate(net.layers):
        c_prev, h_prev = state.c[k], state.h[k]
        z = matvec(layer.W, u) + matvec(layer.U, h_prev) + layer.b
        i = sigmoid(z[:d])
        f = sigmoid(z[d: 2 * d])
        g = tanh(z[2 * d: 3 * d])
        o = sigmoid(z[3 * d:])
        c = f * c_prev + i * g
        h = o * tanh(c)
        cells.append(c)
        hiddens.append(h)
        u = h
    y_hat = float(net.head.w @ u + net.head.b[0])
    return y_hat, CellState(c=tuple(cells), h=tuple(hiddens))


def run_sequence(net: LstmNetwork, xs, initial: CellState = None):
    """Run the network statefully over a whole feature series, one second at
    a time, carrying the cell state across the sequence

    :param net: the :class:`LstmNetwork` (not modified)
    :param xs: numpy array of shape (T, m), T >= 1
    :param initial: the initial :class:`CellState` or None (zero state)

    :return: the tuple (y_hats, final_state) where y_hats is a numpy array of
        length T
    """
    xs = np.asarray(xs, dtype=DTYPE)
    if xs.ndim != 2 or not len(xs):
        raise ShapeError(f'Expected a non-empty feature series of shape '
                         f'(T, {net.config.inputs}), found {xs.shape}')
    state = initial if initial is not None else CellState.zeros(net.config)
    y_hats = np.empty(len(xs))
    for t, x in enumerate(xs):
        y_hats[t], state = step(net, x, state)
    return y_hats, state


def forward_windows(net: LstmNetwork, xs, initial: CellState = None):
    """Evaluate a batch of windows, each starting from the zero state or from
    the given initial state

    :param xs: numpy array of shape (B, T, m)
    :param initial: None (zero state) or a :class:`CellState` whose c and h
        are tuples (one element per layer) of arrays of shape (B, d)

    :return: the tuple (y_hats, caches) where y_hats has shape (B, T) and
        caches is a list (one element per layer) of dicts of arrays of shape
        (T, B, ...) needed by :func:`backward_windows`
    """
    xs = np.asarray(xs, dtype=DTYPE)
    if xs.ndim != 3 or xs.shape[2] != net.config.inputs:
        raise ShapeError(f'Expected windows of shape (B, T, '
                         f'{net.config.inputs}), found {xs.shape}')
    n_win, n_steps, _ = xs.shape
    d = net.config.units
    if initial is None:
        initial = CellState(c=(np.zeros((n_win, d)),) * net.config.layers,
                            h=(np.zeros((n_win, d)),) * net.config.layers)
    elif any(_.shape != (n_win, d) for _ in initial.c + initial.h):
        raise ShapeError(f'Expected initial states of shape ({n_win}, {d})')
    inputs = np.transpose(xs, (1, 0, 2))  # (T, B, m)
    caches = []
    for k, layer in enumerate(net.layers):
        cache = {key: np.empty((n_steps, n_win, d))
                 for key in ('i', 'f', 'g', 'o', 'c', 'tc', 'h')}
        cache['u'] = inputs
        cache['c0'], cache['h0'] = initial.c[k], initial.h[k]
        c, h = initial.c[k], initial.h[k]
        w_t, u_t = layer.W.T, layer.U.T
        for t in range(n_steps):
            z = inputs[t] @ w_t + h @ u_t + layer.b
            i = sigmoid(z[:, :d])
            f = sigmoid(z[:, d: 2 * d])
            g = tanh(z[:, 2 * d: 3 * d])
            o = sigmoid(z[:, 3 * d:])
            c = f * c + i * g
            tc = tanh(c)
            h = o * tc
            for key, val in (('i', i), ('f', f), ('g', g), ('o', o),
                             ('c', c), ('tc', tc), ('h', h)):
                cache[key][t] = val
        caches.append(cache)
        inputs = cache['h']
    y_hats = inputs @ net.head.w + net.head.b[0]  # (T, B)
    return y_hats.T, caches


def sequence_states(net: LstmNetwork, xs):
    """Run the network statefully from the zero state over a batch of
    feature series of equal length T (pad shorter series at the end: padding
    does not affect the states of the preceding seconds)

    :param xs: numpy array of shape (B, T, m)

    :return: a list (one element per layer) of the tuples (c, h), arrays of
        shape (T + 1, B, d) where index t holds the state before second t
        (index 0: the zero state)
    """
    _, caches = forward_windows(net, xs)
    return [(np.concatenate([cache['c0'][None], cache['c']]),
             np.concatenate([cache['h0'][None], cache['h']]))
            for cache in caches]


def backward_windows(net: LstmNetwork, xs, ys, initial: CellState = None):
    """Backpropagation through time over a batch of windows. The initial
    states are constants: gradients are not propagated beyond the window
    start

    :param xs: numpy array of shape (B, T, m)
    :param ys: numpy array of shape (B, T), the (normalized) targets
    :param initial: the initial states, see :func:`forward_windows`

    :return: the tuple (gradients, loss) where loss is the mean over all B*T
        squared errors and gradients is an :class:`LstmNetwork` holding the
        exact derivatives of the loss w.r.t. each parameter
    """
    ys = np.asarray(ys, dtype=DTYPE)
    if not np.isfinite(ys).all():
        raise ValueError('Non-finite target values')
    y_hats, caches = forward_windows(net, xs, initial)
    if ys.shape != y_hats.shape:
        raise ShapeError(f'Targets of shape {ys.shape} do not match windows '
                         f'of shape {y_hats.shape}')
    err = y_hats - ys
    loss = float(np.mean(err * err))
    grads = net.zeros_like()

    d_y = (2.0 / err.size) * err.T  # (T, B)
    grads.head.w[:] = np.einsum('tb,tbd->d', d_y, caches[-1]['h'])
    grads.head.b[0] = d_y.sum()
    # gradient of the loss w.r.t. the hidden outputs of the current layer:
    d_hout = d_y[:, :, None] * net.head.w

    d = net.config.units
    for layer, glayer, cache in zip(reversed(net.layers),
                                    reversed(grads.layers),
                                    reversed(caches)):
        n_steps, n_win, _ = cache['h'].shape
        zeros = np.zeros((n_win, d))
        d_hnext, d_cnext = zeros, zeros
        d_u = np.empty_like(cache['u'])
        for t in reversed(range(n_steps)):
            i, f, g, o = (cache[_][t] for _ in GATES)
            tc = cache['tc'][t]
            c_prev = cache['c'][t - 1] if t > 0 else cache['c0']
            h_prev = cache['h'][t - 1] if t > 0 else cache['h0']
            d_h = d_hout[t] + d_hnext
            d_c = d_cnext + d_h * o * (1.0 - tc * tc)
            d_z = np.concatenate([d_c * g * i * (1.0 - i),
                                  d_c * c_prev * f * (1.0 - f),
                                  d_c * i * (1.0 - g * g),
                                  d_h * tc * o * (1.0 - o)], axis=1)
            glayer.W += d_z.T @ cache['u'][t]
            glayer.U += d_z.T @ h_prev
            glayer.b += d_z.sum(axis=0)
            d_u[t] = d_z @ layer.W
            d_hnext = d_z @ layer.U
            d_cnext = d_c * f
        d_hout = d_u

    return grads, loss


def backward(net: LstmNetwork, window):
    """Backpropagation through time over a single window

    :param net: the :class:`LstmNetwork` (not modified)
    :param window: list of (x, y_target) pairs. The cell state is zero at the
        window start

    :return: the tuple (gradients, loss), see :func:`backward_windows`
    """
    if not len(window):
        raise ValueError('Empty window')
    xs = np.array([_check_input(x, net.config.inputs) for x, _ in window])
    ys = np.array([y for _, y in window], dtype=DTYPE)
    return backward_windows(net, xs[None, :, :], ys[None, :])
