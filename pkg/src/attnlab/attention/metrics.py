"""Learnable pseudo-metrics f(x, y) and the softmax propagation they drive.

Each kind exposes:
  ``matrix(H)``       differentiable N x N matrix F_ij = f(h_i, h_j)
  ``kernel_args(H)``  (queries, keys, mode) for the streaming kernels
  ``params()``        trainable tensors
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from attnlab.errors import DimensionError, ParameterError
from attnlab.numeric import autodiff as ad
from attnlab.numeric.autodiff import Tensor
from attnlab.numeric.rng import RandomSource


def _param(rng: RandomSource, rows, cols, name, std=None, zero=False):
    if zero:
        value = np.zeros((rows, cols))
    else:
        value = rng.derive(name).normal_matrix(rows, cols, std if std is not None else 1.0 / np.sqrt(cols))
    return Tensor(value, requires_grad=True, name=name)


def _as_tensor(h):
    return h if isinstance(h, Tensor) else Tensor(h)


@dataclass
class DotQK:
    """f(x, y) = -x^T Q^T K y."""

    Q: Tensor
    K: Tensor

    @classmethod
    def init(cls, n, m, rng, prefix="qk"):
        return cls(_param(rng, m, n, f"{prefix}.Q"), _param(rng, m, n, f"{prefix}.K"))

    def params(self):
        return [self.Q, self.K]

    def named_params(self):
        return {"Q": self.Q, "K": self.K}

    @property
    def width(self):
        return self.Q.shape[1]

    def matrix(self, h):
        h = _as_tensor(h)
        return -((h @ self.Q.T) @ (h @ self.K.T).T)

    def kernel_args(self, h):
        h = np.asarray(h, dtype=np.float64)
        return h @ self.Q.value.T, h @ self.K.value.T, "dot"


@dataclass
class L2Linear:
    """f(x, y) = |A x - A y|^2."""

    A: Tensor

    @classmethod
    def init(cls, n, m, rng, prefix="l2"):
        return cls(_param(rng, m, n, f"{prefix}.A"))

    @classmethod
    def identity(cls, n):
        return cls(Tensor(np.eye(n), requires_grad=True, name="l2.A"))

    def params(self):
        return [self.A]

    def named_params(self):
        return {"A": self.A}

    @property
    def width(self):
        return self.A.shape[1]

    def embed(self, h):
        return _as_tensor(h) @ self.A.T

    def matrix(self, h):
        return ad.pairwise_sqdist(self.embed(h))

    def kernel_args(self, h):
        z = np.asarray(h, dtype=np.float64) @ self.A.value.T
        return z, z, "sqdist"


@dataclass
class MetricMLP:
    """f(x, y) = |g(x) - g(y)|^2 with the residual MLP g(x) = x + W2 tanh(W1 x + b1) + b2.

    ``b2`` cancels in every difference g(x) - g(y), so it carries no gradient
    and is kept out of ``params()``.
    """

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor = field(default=None)

    def __post_init__(self):
        if self.b2 is None:
            self.b2 = Tensor(np.zeros((1, self.W2.shape[0])), name="mlp.b2")

    @classmethod
    def init(cls, n, hidden, rng, prefix="mlp", zero_output=True):
        return cls(
            _param(rng, hidden, n, f"{prefix}.W1"),
            _param(rng, 1, hidden, f"{prefix}.b1", zero=True),
            _param(rng, n, hidden, f"{prefix}.W2", zero=zero_output),
            Tensor(np.zeros((1, n)), name=f"{prefix}.b2"),
        )

    @classmethod
    def zeros(cls, n, hidden):
        return cls(Tensor(np.zeros((hidden, n)), requires_grad=True), Tensor(np.zeros((1, hidden)), requires_grad=True),
                   Tensor(np.zeros((n, hidden)), requires_grad=True))

    def params(self):
        return [self.W1, self.b1, self.W2]

    def named_params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    @property
    def width(self):
        return self.W1.shape[1]

    def embed(self, h):
        h = _as_tensor(h)
        hidden = ad.tanh(h @ self.W1.T + self.b1)
        return h + (hidden @ self.W2.T + self.b2)

    def matrix(self, h):
        return ad.pairwise_sqdist(self.embed(h))

    def kernel_args(self, h):
        z = self.embed(Tensor(np.asarray(h, dtype=np.float64))).value
        return z, z, "sqdist"


KINDS = {"dot": DotQK, "l2": L2Linear, "metric": MetricMLP}


def pseudo_metric_matrix(h, kind) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != kind.width:
        raise DimensionError(f"features of shape {h.shape} do not fit a metric on width {kind.width}")
    return kind.matrix(Tensor(h)).value


def similarity(h, kind, eps=0.5):
    """S = row_softmax(-F / 2eps) as a tensor."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    h = _as_tensor(h)
    if h.shape[1] != kind.width:
        raise DimensionError(f"features of width {h.shape[1]} do not fit a metric on width {kind.width}")
    return ad.softmin(kind.matrix(h), 2.0 * eps)


def propagate(h, kind, eps=0.5):
    """H_new = S H with S = row_softmax(-F / 2eps). Returns a tensor."""
    h = _as_tensor(h)
    return similarity(h, kind, eps) @ h


@dataclass
class Head:
    kind: object
    value: Tensor  # n x n_out, applied after propagation
    eps: float = 0.5


@dataclass
class MultiHeadSpec:
    heads: list[Head]

    def validate(self):
        if not self.heads:
            raise ParameterError("multi-head spec needs at least one head")
        widths = {h.value.shape[1] for h in self.heads}
        if len(widths) != 1:
            raise DimensionError(f"head value matrices disagree on output width: {sorted(widths)}")
        return self

    def params(self):
        out = []
        for h in self.heads:
            out.extend(h.kind.params())
            out.append(h.value)
        return out


def multi_head_propagate(h, spec: MultiHeadSpec):
    """sum_i S_i(H) H V_i."""
    spec.validate()
    h = _as_tensor(h)
    total = None
    for head in spec.heads:
        if head.value.shape[0] != h.shape[1]:
            raise DimensionError(f"value matrix {head.value.shape} does not fit features {h.shape}")
        term = propagate(h, head.kind, head.eps) @ head.value
        total = term if total is None else total + term
    return total
