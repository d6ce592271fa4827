"""Minimal tape-based reverse-mode differentiation over dense matrices.

Operations run eagerly. Inside a ``with Tape() as tape:`` block every op that
touches a tensor with ``requires_grad`` is appended to the tape together with
its vector-Jacobian product; ``backward(tape, loss)`` replays the tape in
reverse.
"""
from __future__ import annotations

import itertools

import numpy as np

from attnlab.errors import DimensionError, ParameterError
from attnlab.numeric import linalg

_ids = itertools.count()
_active: list["Tape"] = []


class Tensor:
    __slots__ = ("id", "value", "_grad", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None, copy=True):
        v = np.array(value, dtype=np.float64, copy=copy or None)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        elif v.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got shape {v.shape}")
        self.id = next(_ids)
        self.value = v
        self._grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, g):
        self._grad = g

    def zero_grad(self):
        self._grad = None

    def item(self) -> float:
        if self.shape != (1, 1):
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        other = _wrap(other)
        if other.shape != self.shape and other.shape[0] == 1:
            return add_row(self, other)
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    @property
    def T(self):
        return transpose(self)


class Tape:
    """Ordered record of (output, parents, vjp) triples; parents always precede children."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, vjp) -> Tensor:
    req = any(p.requires_grad for p in parents)
    out = Tensor(value, requires_grad=req, copy=False)
    if req and _active:
        _active[-1].nodes.append((out, parents, vjp))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Propagate d(loss)/d(.) through the tape.

    Gradients add into ``.grad`` of every tensor that requires them; leaf
    gradients are also returned keyed by tensor id.
    """
    if loss.shape != (1, 1):
        raise DimensionError(f"loss must be 1x1, got {loss.shape}")
    loss.grad = np.ones((1, 1))
    produced = set()
    for out, parents, vjp in reversed(tape.nodes):
        produced.add(out.id)
        if out._grad is None:
            continue
        for parent, g in zip(parents, vjp(out._grad)):
            if parent.requires_grad and g is not None:
                # never accumulate in place: vjps may hand the same array to two parents
                parent._grad = g if parent._grad is None else parent._grad + g
    leaves = {}
    for _, parents, _ in tape.nodes:
        for p in parents:
            if p.requires_grad and p.id not in produced:
                leaves[p.id] = p.grad
    return leaves


# primitives

def add(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}")
    return _node(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot subtract {b.shape} from {a.shape}")
    return _node(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot multiply elementwise {a.shape} and {b.shape}")
    av, bv = a.value, b.value
    return _node(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a, c: float):
    a = _wrap(a)
    c = float(c)
    return _node(a.value * c, (a,), lambda g: (g * c,))


def add_row(a, b):
    """a + b with the 1 x n row ``b`` broadcast down the rows of ``a``."""
    a, b = _wrap(a), _wrap(b)
    if b.shape != (1, a.shape[1]):
        raise DimensionError(f"row bias {b.shape} does not fit {a.shape}")
    return _node(a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    av, bv = a.value, b.value
    return _node(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a):
    a = _wrap(a)
    return _node(a.value.T.copy(), (a,), lambda g: (g.T,))


def tanh(a):
    a = _wrap(a)
    t = np.tanh(a.value)
    return _node(t, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a):
    a = _wrap(a)
    e = np.exp(a.value)
    return _node(e, (a,), lambda g: (g * e,))


def total(a):
    a = _wrap(a)
    shape = a.shape
    return _node(np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def row_softmax(a, temperature=1.0):
    if not temperature > 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    a = _wrap(a)
    s = linalg.row_softmax(a.value, temperature)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)) / temperature,)

    return _node(s, (a,), vjp)


def softmin(a, temperature=1.0):
    """row_softmax(-a / temperature) as a single node."""
    if not temperature > 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    a = _wrap(a)
    s = linalg.row_softmax(a.value, -temperature, _allow_negative=True)

    def vjp(g):
        d = g * s
        d -= s * d.sum(axis=1, keepdims=True)
        d *= -1.0 / temperature
        return (d,)

    return _node(s, (a,), vjp)


def pairwise_sqdist(a):
    a = _wrap(a)
    x = a.value
    d = linalg.pairwise_sqdist(x)

    def vjp(g):
        gs = g + g.T
        out = gs.sum(axis=1, keepdims=True) * x
        out -= gs @ x
        out *= 2.0
        return (out,)

    return _node(d, (a,), vjp)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under row-softmax(logits)."""
    logits = _wrap(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"need {n} labels, got shape {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ParameterError(f"labels must lie in [0, {k})")
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, labels]))
    p = np.exp(z - logsum[:, None])

    def vjp(g):
        d = p.copy()
        d[rows, labels] -= 1.0
        return (d * (g[0, 0] / n),)

    return _node(np.array([[loss]]), (logits,), vjp)


def grad_check(forward, params, h=1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``forward`` must be a pure zero-argument callable returning a 1x1 tensor
    built from ``params``; entries are perturbed in place and restored.
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = forward()
    backward(tape, loss)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        for idx in np.ndindex(*p.shape):
            orig = p.value[idx]
            p.value[idx] = orig + h
            fp = forward().item()
            p.value[idx] = orig - h
            fm = forward().item()
            p.value[idx] = orig
            numeric = (fp - fm) / (2.0 * h)
            err = abs(analytic[idx] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
    return worst
