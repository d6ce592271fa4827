"""Information propagation network: linear -> propagation blocks -> linear -> softmax."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from attnlab.attention.metrics import KINDS, DotQK, L2Linear, MetricMLP, propagate
from attnlab.errors import DimensionError, ParameterError
from attnlab.numeric import autodiff as ad
from attnlab.numeric.autodiff import Tensor
from attnlab.numeric.rng import RandomSource


@dataclass
class Block:
    kind: object
    eps: float = 0.5


@dataclass
class IPNModel:
    w_in: Tensor  # n_in x width
    b_in: Tensor
    blocks: list[Block]
    w_out: Tensor  # width x n_classes
    b_out: Tensor
    attention: str = "custom"

    def __post_init__(self):
        if not self.blocks:
            raise ParameterError("an IPN needs at least one propagation block")
        width = self.w_in.shape[1]
        for i, b in enumerate(self.blocks):
            if not b.eps > 0:
                raise ParameterError(f"block {i}: eps must be positive")
            if b.kind.width != width:
                raise DimensionError(f"block {i} expects width {b.kind.width}, model width is {width}")
        if self.w_out.shape[0] != width:
            raise DimensionError(f"output map expects width {self.w_out.shape[0]}, model width is {width}")

    def named_params(self) -> dict[str, Tensor]:
        out = {"input.weight": self.w_in, "input.bias": self.b_in}
        for i, b in enumerate(self.blocks):
            for name, p in b.kind.named_params().items():
                out[f"blocks.{i}.{name}"] = p
        out["output.weight"] = self.w_out
        out["output.bias"] = self.b_out
        return out

    def params(self) -> list[Tensor]:
        return [p for p in self.named_params().values() if p.requires_grad]

    def forward(self, x):
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.shape[1] != self.w_in.shape[0]:
            raise DimensionError(f"inputs of width {x.shape[1]}, model expects {self.w_in.shape[0]}")
        h = x @ self.w_in + self.b_in
        for b in self.blocks:
            h = propagate(h, b.kind, b.eps)
        return h @ self.w_out + self.b_out

    def to_json(self) -> str:
        doc = {
            name: {"shape": list(p.shape), "values": p.value.ravel().tolist()}
            for name, p in self.named_params().items()
        }
        return json.dumps(doc, indent=1)

    def load_json(self, text: str):
        doc = json.loads(text)
        params = self.named_params()
        if set(doc) != set(params):
            raise ParameterError(f"snapshot names differ: {sorted(set(doc) ^ set(params))}")
        for name, entry in doc.items():
            p = params[name]
            if tuple(entry["shape"]) != p.shape:
                raise DimensionError(f"{name}: snapshot shape {entry['shape']} vs model {p.shape}")
            p.value[...] = np.asarray(entry["values"], dtype=np.float64).reshape(p.shape)
        return self


def make_kind(kind: str, width: int, rng: RandomSource, prefix: str, qk_dim=None, mlp_width=None):
    if kind == "dot":
        return DotQK.init(width, qk_dim or width, rng, prefix)
    if kind == "l2":
        return L2Linear.init(width, qk_dim or width, rng, prefix)
    if kind == "metric":
        return MetricMLP.init(width, mlp_width or width, rng, prefix)
    raise ParameterError(f"unknown attention kind {kind!r}; choose from {sorted(KINDS)}")


def build_ipn(kind: str, n_in: int, width: int, n_classes: int, n_blocks: int = 2, eps: float = 0.5,
              seed: int = 0, qk_dim=None, mlp_width=None) -> IPNModel:
    """Weights ~ N(0, 1/fan_in); biases zero; metric-MLP output layer zero."""
    rng = RandomSource(seed).derive("ipn/init")

    def lin(rows, cols, name):
        return Tensor(rng.derive(name).normal_matrix(rows, cols, 1.0 / np.sqrt(rows)), requires_grad=True, name=name)

    blocks = [
        Block(make_kind(kind, width, rng, f"blocks.{i}", qk_dim, mlp_width), eps) for i in range(n_blocks)
    ]
    return IPNModel(
        w_in=lin(n_in, width, "input.weight"),
        b_in=Tensor(np.zeros((1, width)), requires_grad=True, name="input.bias"),
        blocks=blocks,
        w_out=lin(width, n_classes, "output.weight"),
        b_out=Tensor(np.zeros((1, n_classes)), requires_grad=True, name="output.bias"),
        attention=kind,
    )


def ipn_forward(model: IPNModel, x) -> np.ndarray:
    return model.forward(x).value


def loss_fn(model: IPNModel, x, y):
    return ad.cross_entropy(model.forward(x), y)
