from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from attnlab.errors import DimensionError, ParameterError


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params) -> "AdamState":
        shapes = [_value(p).shape for p in params]
        return cls(m=[np.zeros(s) for s in shapes], v=[np.zeros(s) for s in shapes])


def _value(p):
    return p.value if hasattr(p, "value") else p


def adam_update(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0):
    """One Adam step in place, with decoupled weight decay applied first."""
    if not lr > 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    if weight_decay < 0:
        raise ParameterError(f"weight decay must be nonnegative, got {weight_decay}")
    if not len(params) == len(grads) == len(state.m):
        raise DimensionError("params, grads and optimizer state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        w = _value(p)
        if g.shape != w.shape or m.shape != w.shape:
            raise DimensionError(f"gradient {g.shape} does not match parameter {w.shape}")
        if weight_decay:
            w -= lr * weight_decay * w
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        w -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
