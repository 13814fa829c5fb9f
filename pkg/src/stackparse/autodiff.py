"""Reverse-mode differentiation over per-sentence computation graphs.

Every operation returns a :class:`Node` holding its forward value and a
closure that maps the upstream gradient to gradients for its inputs.  A graph
is simply the set of nodes reachable from a loss; node ids grow monotonically,
so sorting by id gives a topological order without any bookkeeping.

Persistent weights live in a :class:`ParameterStore` as :class:`Parameter`
leaves whose ``grad`` buffers accumulate across every use in a graph.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ShapeError

DTYPE = np.float64

_ids = itertools.count()


class Node:
    __slots__ = ("value", "parents", "backward_fn", "id", "op")

    def __init__(self, value, parents=(), backward_fn=None, op="const"):
        self.value = value
        self.parents = parents if type(parents) is tuple else tuple(parents)
        self.backward_fn = backward_fn
        self.op = op
        self.id = next(_ids)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"


class Parameter(Node):
    """A persistent leaf; gradients from every graph accumulate into ``grad``."""

    __slots__ = ("name", "grad", "trainable")

    def __init__(self, name: str, value: np.ndarray, trainable: bool = True):
        super().__init__(np.ascontiguousarray(value, dtype=DTYPE), op="param")
        self.name = name
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def constant(value) -> Node:
    return Node(np.array(value, dtype=DTYPE))


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in +/- sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be positive, got {rows}x{cols}")
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


class ParameterStore:
    """Named collection of parameters; names are unique and shapes fixed."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, shape, rng: np.random.Generator | None = None,
            init: str = "glorot", trainable: bool = True) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        shape = tuple(int(s) for s in (shape if isinstance(shape, Sequence) else (shape,)))
        if any(s < 1 for s in shape):
            raise ValueError(f"parameter {name!r} has non-positive shape {shape}")
        if init == "zeros":
            value = np.zeros(shape, dtype=DTYPE)
        elif init == "glorot":
            if rng is None:
                raise ValueError("glorot init needs a generator")
            rows, cols = (shape[0], 1) if len(shape) == 1 else shape
            value = glorot_init(rows, cols, rng).reshape(shape)
        elif init == "rows":
            # lookup tables: each row is initialized as its own vector
            value = np.stack([glorot_init(shape[1], 1, rng)[:, 0] for _ in range(shape[0])])
        else:
            raise ValueError(f"unknown init {init!r}")
        return self.set(name, value, trainable=trainable)

    def set(self, name: str, value: np.ndarray, trainable: bool = True) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Parameter(name, value, trainable=trainable)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def trainable(self) -> list[Parameter]:
        return [p for p in self._params.values() if p.trainable]

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def grad_norm(self) -> float:
        return math.sqrt(sum(float(np.dot(p.grad.ravel(), p.grad.ravel()))
                             for p in self.trainable()))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, v in values.items():
            p = self._params[name]
            if v.shape != p.value.shape:
                raise ShapeError(f"{name}: stored shape {v.shape} != {p.value.shape}")
            p.value[...] = v


def sgd_step(store: ParameterStore, lr: float, l2: float = 0.0) -> None:
    """theta <- theta - lr * (grad + l2 * theta), then reset gradients."""
    for p in store.trainable():
        if l2:
            p.value -= lr * (p.grad + l2 * p.value)
        else:
            p.value -= lr * p.grad
        p.grad[...] = 0.0


# ---------------------------------------------------------------- operations


def _vec(node: Node, what: str) -> None:
    if node.value.ndim != 1:
        raise ShapeError(f"{what} must be a vector, got shape {node.value.shape}")


def affine_sum(b: Node | None, pairs: Sequence[tuple[Node, Node]]) -> Node:
    """b + sum_k W_k x_k as a single node."""
    if not pairs:
        raise ValueError("affine_sum needs at least one (W, x) pair")
    out = None
    parents = []
    for W, x in pairs:
        Wv, xv = W.value, x.value
        if xv.ndim != 1 or Wv.ndim != 2 or Wv.shape[1] != xv.shape[0]:
            raise ShapeError(f"cannot apply {Wv.shape} matrix to {xv.shape} input")
        term = Wv.dot(xv)
        if out is None:
            out = term
        elif term.shape != out.shape:
            raise ShapeError(f"affine terms disagree: {term.shape} vs {out.shape}")
        else:
            out += term
        parents.append(W)
        parents.append(x)
    if b is not None:
        if b.value.shape != out.shape:
            raise ShapeError(f"bias shape {b.value.shape} != output shape {out.shape}")
        out += b.value
        parents.append(b)
    npairs = len(pairs)

    def backward(g):
        grads = []
        for k in range(0, 2 * npairs, 2):
            grads.append(np.outer(g, parents[k + 1].value))
            grads.append(g.dot(parents[k].value))
        if b is not None:
            grads.append(g)
        return grads

    return Node(out, parents, backward, "affine")


def affine(W: Node, x: Node, b: Node | None = None) -> Node:
    """W x (+ b); the single-matrix case of :func:`affine_sum`."""
    Wv, xv = W.value, x.value
    if xv.ndim != 1 or Wv.ndim != 2 or Wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"cannot apply {Wv.shape} matrix to {xv.shape} input")
    out = Wv.dot(xv)
    if b is None:
        return Node(out, (W, x), lambda g: (np.outer(g, xv), g.dot(Wv)), "affine")
    if b.value.shape != out.shape:
        raise ShapeError(f"bias shape {b.value.shape} != output shape {out.shape}")
    out += b.value
    return Node(out, (W, x, b), lambda g: (np.outer(g, xv), g.dot(Wv), g), "affine")


_sigmoid = expit


def pointwise(kind: str, x: Node) -> Node:
    v = x.value
    if kind == "tanh":
        y = np.tanh(v)
        return Node(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")
    if kind in ("sigmoid", "logistic"):
        y = _sigmoid(v)
        return Node(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")
    if kind == "relu":
        mask = v > 0
        return Node(np.maximum(v, 0.0), (x,), lambda g: (g * mask,), "relu")
    raise ValueError(f"unknown pointwise kind {kind!r}")


def tanh(x: Node) -> Node:
    return pointwise("tanh", x)


def sigmoid(x: Node) -> Node:
    return pointwise("sigmoid", x)


def relu(x: Node) -> Node:
    return pointwise("relu", x)


def hadamard(a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"hadamard of {a.value.shape} and {b.value.shape}")
    return Node(a.value * b.value, (a, b),
                lambda g: (g * b.value, g * a.value), "hadamard")


def add(*nodes: Node) -> Node:
    if not nodes:
        raise ValueError("add needs at least one operand")
    shape = nodes[0].value.shape
    for n in nodes[1:]:
        if n.value.shape != shape:
            raise ShapeError(f"add of {shape} and {n.value.shape}")
    out = nodes[0].value.copy()
    for n in nodes[1:]:
        out = out + n.value
    return Node(out, nodes, lambda g: [g] * len(nodes), "add")


def scale(x: Node, k: float) -> Node:
    return Node(x.value * k, (x,), lambda g: (g * k,), "scale")


def concat(parts: Sequence[Node]) -> Node:
    if not parts:
        raise ValueError("concat needs at least one part")
    values = [p.value for p in parts]
    for v in values:
        if v.ndim != 1:
            raise ShapeError(f"concat part must be a vector, got shape {v.shape}")
    out = np.concatenate(values)

    def backward(g):
        bounds = list(itertools.accumulate((v.shape[0] for v in values), initial=0))
        return [g[bounds[k]:bounds[k + 1]] for k in range(len(values))]

    return Node(out, parts, backward, "concat")


def lookup(table: Parameter, index: int, update: bool = True) -> Node:
    """Row ``index`` of ``table``; ``update=False`` keeps the row out of backprop."""
    row = table.value[index].copy()
    if not update:
        return Node(row, op="lookup-const")

    def backward(g):
        table.grad[index] += g
        return ()

    return Node(row, (), backward, "lookup")


def pick(x: Node, index: int) -> Node:
    _vec(x, "pick operand")
    n = x.value.shape[0]

    def backward(g):
        out = np.zeros(n, dtype=DTYPE)
        out[index] = g
        return (out,)

    return Node(np.array(x.value[index]), (x,), backward, "pick")


def sum_elements(x: Node) -> Node:
    return Node(np.array(x.value.sum()), (x,),
                lambda g: (np.full(x.value.shape, g, dtype=DTYPE),), "sum")


def restricted_log_softmax(scores: Node, allowed: Iterable[int]) -> Node:
    """Log-softmax over ``allowed`` entries only; the rest are -inf.

    Disallowed entries are flagged by a boolean mask and never enter the
    arithmetic, so backward cannot produce NaN from inf - inf.
    """
    _vec(scores, "scores")
    k = scores.value.shape[0]
    idx = sorted(set(allowed))
    if not idx:
        raise ValueError("restricted_log_softmax needs a non-empty allowed set")
    if idx[0] < 0 or idx[-1] >= k:
        raise ValueError(f"allowed indices out of range [0, {k})")
    s = scores.value[idx]
    shifted = s - np.maximum.reduce(s)
    e = np.exp(shifted)
    z = np.add.reduce(e)
    logp = shifted - math.log(z)
    out = np.full(k, -np.inf, dtype=DTYPE)
    out[idx] = logp
    probs = e / z

    def backward(g):
        ga = g[idx]
        grad = np.zeros(k, dtype=DTYPE)
        grad[idx] = ga - probs * ga.sum()
        return (grad,)

    node = Node(out, (scores,), backward, "log_softmax")
    return node


# ------------------------------------------------------------------ backward


def topological_order(root: Node) -> list[Node]:
    """Nodes reachable from ``root``, inputs before consumers.

    Raises if any edge points forward in creation order, which is the only way
    a cycle could arise.
    """
    seen = {root.id: root}
    todo = [root]
    while todo:
        node = todo.pop()
        for p in node.parents:
            if p.id >= node.id and not isinstance(p, Parameter):
                raise RuntimeError("graph edge does not respect creation order")
            if p.id not in seen:
                seen[p.id] = p
                todo.append(p)
    return [seen[i] for i in sorted(seen)]


def backward(loss: Node) -> None:
    """Accumulate d loss / d param into every reachable parameter's ``grad``."""
    if loss.value.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.value)}
    for node in reversed(topological_order(loss)):
        g = grads.pop(node.id, None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            if node.trainable:
                node.grad += g
            continue
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None:
                continue
            if pg.shape != parent.value.shape:
                raise ShapeError(f"{node.op} sent a {pg.shape} gradient to a "
                                 f"{parent.value.shape} input")
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = pg


def numeric_gradient(f: Callable[[], float], param: Parameter, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``f`` with respect to every entry of ``param``."""
    out = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return out
