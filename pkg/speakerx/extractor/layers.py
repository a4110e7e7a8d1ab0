"""Layers with hand-written reverse-mode derivatives.

Every layer exposes ``shapes()`` (parameter name -> shape), ``forward`` which
returns the output together with whatever the backward pass needs, and
``backward`` which accumulates parameter gradients into ``grads`` and returns
the gradient with respect to its input. Layers that consume the speaker
conditioning (adaptation weights or embedding) receive it as ``cond`` and
report its gradient through ``side['cond']``.
"""
import numpy as np
from scipy.special import expit

from ..errors import DimensionError, NumericOverflowError

ACTIVATIONS = ("linear", "relu", "sigmoid")


def _finite(layer, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericOverflowError(layer)
    return arr


def _accumulate(side, key, value):
    if key in side:
        side[key] = side[key] + value
    else:
        side[key] = value


class Tape:
    """Records a chain of layer applications and replays it backwards."""

    def __init__(self):
        self._records = []
        self.side_grads = {}

    def apply(self, layer, params, x, cond=None):
        y, cache = layer.forward(params, x, cond)
        self._records.append((layer, cache))
        return y

    def backward(self, params, dy, grads):
        for layer, cache in reversed(self._records):
            dy = layer.backward(params, dy, cache, grads, self.side_grads)
        return dy


class Dense:
    def __init__(self, name, n_in, n_out, activation="linear"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.name, self.n_in, self.n_out, self.activation = name, n_in, n_out, activation
        self.w, self.b = f"{name}.w", f"{name}.b"

    def shapes(self):
        return {self.w: (self.n_in, self.n_out), self.b: (self.n_out,)}

    def forward(self, params, x, cond=None):
        if x.shape[-1] != self.n_in:
            raise DimensionError(f"{self.name}: expected input width {self.n_in}, got {x.shape[-1]}")
        z = x @ params[self.w] + params[self.b]
        if self.activation == "relu":
            y = np.maximum(z, 0.0)
        elif self.activation == "sigmoid":
            y = expit(z)
        else:
            y = z
        return _finite(self.name, y), (x, y)

    def backward(self, params, dy, cache, grads, side):
        x, y = cache
        if self.activation == "relu":
            dz = dy * (y > 0.0)
        elif self.activation == "sigmoid":
            dz = dy * y * (1.0 - y)
        else:
            dz = dy
        grads[self.w] += x.T @ dz
        grads[self.b] += dz.sum(axis=0)
        return _finite(self.name, dz @ params[self.w].T)


def _lstm_forward(x, wx, wh, b):
    n_frames, cells = x.shape[0], wh.shape[0]
    zx = x @ wx + b
    h = np.zeros((n_frames + 1, cells))
    c = np.zeros((n_frames + 1, cells))
    gates = np.empty((n_frames, 4 * cells))
    for t in range(n_frames):
        z = zx[t] + h[t] @ wh
        i = expit(z[:cells])
        f = expit(z[cells:2 * cells])
        o = expit(z[2 * cells:3 * cells])
        g = np.tanh(z[3 * cells:])
        c[t + 1] = f * c[t] + i * g
        h[t + 1] = o * np.tanh(c[t + 1])
        gates[t] = np.concatenate([i, f, o, g])
    return h[1:], (x, h, c, gates)


def _lstm_backward(dh_out, cache, wx, wh):
    x, h, c, gates = cache
    n_frames, cells = dh_out.shape
    dz = np.empty((n_frames, 4 * cells))
    dh_next = np.zeros(cells)
    dc_next = np.zeros(cells)
    for t in reversed(range(n_frames)):
        i, f, o, g = np.split(gates[t], 4)
        tc = np.tanh(c[t + 1])
        dh = dh_out[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz[t, :cells] = dc * g * i * (1.0 - i)
        dz[t, cells:2 * cells] = dc * c[t] * f * (1.0 - f)
        dz[t, 2 * cells:3 * cells] = dh * tc * o * (1.0 - o)
        dz[t, 3 * cells:] = dc * i * (1.0 - g * g)
        dh_next = dz[t] @ wh.T
        dc_next = dc * f
    return dz @ wx.T, x.T @ dz, h[:-1].T @ dz, dz.sum(axis=0)


class Blstm:
    """Bidirectional LSTM; output is [forward ; backward] hidden states."""

    def __init__(self, name, n_in, cells):
        self.name, self.n_in, self.cells = name, n_in, cells
        self.n_out = 2 * cells

    def _keys(self, direction):
        return tuple(f"{self.name}.{direction}.{k}" for k in ("wx", "wh", "b"))

    def shapes(self):
        out = {}
        for direction in ("fwd", "bwd"):
            wx, wh, b = self._keys(direction)
            out[wx] = (self.n_in, 4 * self.cells)
            out[wh] = (self.cells, 4 * self.cells)
            out[b] = (4 * self.cells,)
        return out

    def forward(self, params, x, cond=None):
        if x.shape[-1] != self.n_in:
            raise DimensionError(f"{self.name}: expected input width {self.n_in}, got {x.shape[-1]}")
        hf, cache_f = _lstm_forward(x, *(params[k] for k in self._keys("fwd")))
        hb, cache_b = _lstm_forward(x[::-1], *(params[k] for k in self._keys("bwd")))
        y = np.concatenate([hf, hb[::-1]], axis=1)
        return _finite(self.name, y), (cache_f, cache_b)

    def backward(self, params, dy, cache, grads, side):
        cache_f, cache_b = cache
        dx = np.zeros((dy.shape[0], self.n_in))
        for direction, d_out, lstm_cache, flip in (
            ("fwd", dy[:, :self.cells], cache_f, False),
            ("bwd", dy[::-1, self.cells:], cache_b, True),
        ):
            wx, wh, b = self._keys(direction)
            d_in, dwx, dwh, db = _lstm_backward(d_out, lstm_cache, params[wx], params[wh])
            grads[wx] += dwx
            grads[wh] += dwh
            grads[b] += db
            dx += d_in[::-1] if flip else d_in
        return _finite(self.name, dx)


class Adaptation:
    """Context-adaptive layer: sum_m alpha_m * relu(x W_m + b_m)."""

    def __init__(self, name, n_in, n_out, n_sublayers):
        self.name, self.n_in, self.n_out, self.n_sublayers = name, n_in, n_out, n_sublayers
        self.w, self.b = f"{name}.w", f"{name}.b"

    def shapes(self):
        return {self.w: (self.n_sublayers, self.n_in, self.n_out), self.b: (self.n_sublayers, self.n_out)}

    def forward(self, params, x, cond=None):
        alpha = np.asarray(cond)
        if alpha.shape != (self.n_sublayers,):
            raise DimensionError(f"{self.name}: expected {self.n_sublayers} adaptation weights, got shape {alpha.shape}")
        z = np.einsum("ti,mio->mto", x, params[self.w]) + params[self.b][:, None, :]
        r = np.maximum(z, 0.0)
        y = np.einsum("m,mto->to", alpha, r)
        return _finite(self.name, y), (x, r, alpha)

    def backward(self, params, dy, cache, grads, side):
        x, r, alpha = cache
        _accumulate(side, "cond", np.einsum("to,mto->m", dy, r))
        dz = alpha[:, None, None] * dy[None, :, :] * (r > 0.0)
        grads[self.w] += np.einsum("ti,mto->mio", x, dz)
        grads[self.b] += dz.sum(axis=1)
        return _finite(self.name, np.einsum("mto,mio->ti", dz, params[self.w]))


class ConcatEmbedding:
    """Appends the same speaker embedding to every frame."""

    def __init__(self, name, n_in, embed_dim):
        self.name, self.n_in, self.embed_dim = name, n_in, embed_dim
        self.n_out = n_in + embed_dim

    def shapes(self):
        return {}

    def forward(self, params, x, cond=None):
        e = np.asarray(cond)
        if e.shape != (self.embed_dim,):
            raise DimensionError(f"{self.name}: expected a {self.embed_dim}-d embedding, got shape {e.shape}")
        return np.concatenate([x, np.broadcast_to(e, (x.shape[0], self.embed_dim))], axis=1), x.shape[1]

    def backward(self, params, dy, cache, grads, side):
        n_x = cache
        _accumulate(side, "cond", dy[:, n_x:].sum(axis=0))
        return dy[:, :n_x]


class FrameMean:
    """Averages frames into one utterance-level vector."""

    def __init__(self, name):
        self.name = name

    def shapes(self):
        return {}

    def forward(self, params, x, cond=None):
        return x.mean(axis=0), x.shape[0]

    def backward(self, params, dy, cache, grads, side):
        n_frames = cache
        return np.broadcast_to(dy / n_frames, (n_frames, dy.shape[0])).copy()
