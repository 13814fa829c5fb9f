"""Stack LSTMs: recurrent cells whose inputs form a persistent stack.

``push`` always appends a new backbone entry computed from the entry under
the stack pointer; ``pop`` only moves the pointer back along a back-pointer.
Entries are never mutated, so states can be branched freely and old entries
stay alive for backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .errors import ShapeError, StackUnderflow


class LSTMBuilder:
    """Multi-layer LSTM cell with full-matrix peephole connections.

    Layer ``k > 0`` reads the hidden state of layer ``k - 1`` as its input.
    Gate weights are stored stacked per layer (rows ordered input, forget,
    cell, output); :meth:`weights` exposes the individual matrices as views.
    """

    kind = "lstm"

    def __init__(self, store: ad.ParameterStore, prefix: str, input_dim: int,
                 hidden_dim: int, layers: int, rng: np.random.Generator | None = None,
                 init: str = "glorot"):
        if layers < 1:
            raise ValueError(f"layers must be >= 1, got {layers}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.layers = []
        m = hidden_dim
        for k in range(layers):
            n = input_dim if k == 0 else hidden_dim
            p = f"{prefix}.l{k}."
            self.layers.append((
                _blocks(store, p + "W_x", [(m, n)] * 4, rng, init),
                _blocks(store, p + "W_h", [(m, m)] * 4, rng, init),
                _blocks(store, p + "W_c", [(m, m)] * 2, rng, init),   # peepholes of i, f
                store.add(p + "W_oc", (m, m), rng, init),
                _blocks(store, p + "b", [(m,)] * 4, rng, init),
            ))
        self._zero = np.zeros(hidden_dim)
        self._h_backward = _h_slice_backward(hidden_dim)

    def weights(self, layer: int) -> dict[str, np.ndarray]:
        """Writable views W_ix, W_ih, W_ic, b_i, ... for one layer."""
        Wx, Wh, Wc, Woc, b = (p.value for p in self.layers[layer])
        m = self.hidden_dim
        out = {}
        for g, gate in enumerate("ifco"):
            rows = slice(g * m, (g + 1) * m)
            out[f"W_{gate}x"] = Wx[rows]
            out[f"W_{gate}h"] = Wh[rows]
            out[f"b_{gate}"] = b[rows]
        out["W_ic"], out["W_fc"], out["W_oc"] = Wc[:m], Wc[m:], Woc
        return out

    def initial_state(self):
        zero = ad.constant(np.zeros(2 * self.hidden_dim))
        return tuple((zero, ad.constant(self._zero)) for _ in self.layers)

    def step(self, x: ad.Node, prev):
        """One time step; ``prev`` holds a (cell, h) pair per layer.

        The cell entry is the fused [c; h] node of that layer, the second entry
        its h half.
        """
        if x.value.shape != (self.input_dim,):
            raise ShapeError(f"stack input has shape {x.value.shape}, expected ({self.input_dim},)")
        out = []
        inp = x
        m = self.hidden_dim
        for P, (ch_prev, _) in zip(self.layers, prev):
            ch = lstm_cell(P, inp, ch_prev)
            h = ad.Node(ch.value[m:], (ch,), self._h_backward, "slice")
            out.append((ch, h))
            inp = h
        return tuple(out)


def _blocks(store, name, shapes, rng, init):
    """One parameter made of row blocks, each initialized as its own matrix."""
    if init != "glorot":
        rows = sum(s[0] for s in shapes)
        return store.add(name, (rows,) + tuple(shapes[0][1:]), rng, init)
    parts = []
    for s in shapes:
        r, c = (s[0], 1) if len(s) == 1 else s
        parts.append(ad.glorot_init(r, c, rng).reshape(s))
    return store.set(name, np.concatenate(parts))


def _h_slice_backward(m):
    def backward(g):
        out = np.zeros(2 * m)
        out[m:] = g
        return (out,)
    return backward


def lstm_cell(P, x: ad.Node, ch_prev: ad.Node) -> ad.Node:
    """One LSTM layer step as a single node whose value is [c; h].

    i = sig(W_ix x + W_ih h' + W_ic c' + b_i)
    f = sig(W_fx x + W_fh h' + W_fc c' + b_f)
    c = f * c' + i * tanh(W_cx x + W_ch h' + b_c)
    o = sig(W_ox x + W_oh h' + W_oc c + b_o)
    h = o * tanh(c)
    """
    Wx, Wh, Wc, Woc, b = P[0].value, P[1].value, P[2].value, P[3].value, P[4].value
    m = Woc.shape[0]
    m2, m3 = 2 * m, 3 * m
    xv = x.value
    cp, hp = ch_prev.value[:m], ch_prev.value[m:]
    # ndarray.dot has far less call overhead than @ on vectors this small
    pre = Wx.dot(xv)
    pre += Wh.dot(hp)
    pre += b
    pre[:m2] += Wc.dot(cp)
    gates = ad._sigmoid(pre[:m2])
    i, f = gates[:m], gates[m:]
    g = np.tanh(pre[m2:m3])
    c = f * cp
    c += i * g
    o = ad._sigmoid(pre[m3:] + Woc.dot(c))
    tc = np.tanh(c)

    def backward(grad):
        gc, gh = grad[:m], grad[m:]
        dpre = np.empty(4 * m)
        dao = dpre[m3:]
        dao[:] = gh * tc * o * (1.0 - o)
        dc = gc + gh * o * (1.0 - tc * tc) + dao.dot(Woc)
        dpre[:m] = dc * g * i * (1.0 - i)
        dpre[m:m2] = dc * cp * f * (1.0 - f)
        dpre[m2:m3] = dc * i * (1.0 - g * g)
        dcp = dc * f + dpre[:m2].dot(Wc)
        return (dpre.dot(Wx), np.concatenate([dcp, dpre.dot(Wh)]),
                np.outer(dpre, xv), np.outer(dpre, hp), np.outer(dpre[:m2], cp),
                np.outer(dao, c), dpre)

    return ad.Node(np.concatenate([c, o * tc]), (x, ch_prev, *P), backward, "lstm")


class RNNBuilder:
    """Classical multi-layer recurrence h_t = sigmoid(W_hx x + W_hh h_{t-1} + b)."""

    kind = "rnn"

    def __init__(self, store: ad.ParameterStore, prefix: str, input_dim: int,
                 hidden_dim: int, layers: int, rng: np.random.Generator | None = None,
                 init: str = "glorot"):
        if layers < 1:
            raise ValueError(f"layers must be >= 1, got {layers}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.layers = []
        for k in range(layers):
            n = input_dim if k == 0 else hidden_dim
            p = f"{prefix}.l{k}."
            self.layers.append({
                "W_hx": store.add(p + "W_hx", (hidden_dim, n), rng, init),
                "W_hh": store.add(p + "W_hh", (hidden_dim, hidden_dim), rng, init),
                "b_h": store.add(p + "b_h", (hidden_dim,), rng, init),
            })
        self._zero = np.zeros(hidden_dim)

    def initial_state(self):
        return tuple((None, ad.constant(self._zero)) for _ in self.layers)

    def step(self, x: ad.Node, prev):
        if x.value.shape != (self.input_dim,):
            raise ShapeError(f"stack input has shape {x.value.shape}, expected ({self.input_dim},)")
        out = []
        inp = x
        for P, (_, h_prev) in zip(self.layers, prev):
            h = ad.sigmoid(ad.affine_sum(P["b_h"], [(P["W_hx"], inp), (P["W_hh"], h_prev)]))
            out.append((None, h))
            inp = h
        return tuple(out)


class Entry(NamedTuple):
    states: tuple   # per-layer (c, h)
    input: ad.Node
    prev: int       # backbone index of the entry below; -1 for the guard


@dataclass(frozen=True)
class StackLSTMState:
    """An immutable view (pointer + depth) onto a shared append-only backbone."""

    builder: object
    backbone: list
    top: int
    depth: int

    def push(self, x: ad.Node) -> "StackLSTMState":
        entry = self.backbone[self.top]
        states = self.builder.step(x, entry.states)
        self.backbone.append(Entry(states, x, self.top))
        return StackLSTMState(self.builder, self.backbone, len(self.backbone) - 1, self.depth + 1)

    def pop(self) -> tuple["StackLSTMState", ad.Node]:
        if self.depth == 0:
            raise StackUnderflow("pop on an empty stack LSTM")
        entry = self.backbone[self.top]
        return StackLSTMState(self.builder, self.backbone, entry.prev, self.depth - 1), entry.input

    def summary(self) -> ad.Node:
        return self.backbone[self.top].states[-1][1]

    def live_inputs(self) -> list[ad.Node]:
        """Inputs from bottom (excluding the guard) to top."""
        out = []
        i = self.top
        while self.backbone[i].prev != -1:
            out.append(self.backbone[i].input)
            i = self.backbone[i].prev
        return out[::-1]

    def __len__(self):
        return self.depth


def new_stack(builder, guard_input: ad.Node) -> StackLSTMState:
    """A stack whose only entry is the guard, run through one cell step from zeros."""
    states = builder.step(guard_input, builder.initial_state())
    return StackLSTMState(builder, [Entry(states, guard_input, -1)], 0, 0)


def push(s: StackLSTMState, x: ad.Node) -> StackLSTMState:
    return s.push(x)


def pop(s: StackLSTMState):
    return s.pop()


def summary(s: StackLSTMState) -> ad.Node:
    return s.summary()
