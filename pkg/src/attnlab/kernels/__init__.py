"""Streaming softmax kernels over point sets.

``softmax_smooth`` computes, for every query row, the softmax-weighted average
of ``values`` over all keys without materialising the N x M weight matrix.
The compiled extension is used when it was built; otherwise the numpy
fallback is selected at import. ``BACKEND`` names the active one.
"""
from __future__ import annotations

import numpy as np

from attnlab.errors import DimensionError, ParameterError
from attnlab.kernels import _fallback

try:
    from attnlab.kernels import _core
except ImportError:  # extension not built
    _core = None

BACKEND = "compiled" if _core is not None else "python"
MODES = {"sqdist": 0, "dot": 1}


def _impl(backend):
    backend = backend or BACKEND
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        return _core
    if backend == "python":
        return _fallback
    raise ValueError(f"unknown backend {backend!r}")


def _points(a, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def softmax_smooth(queries, keys, values, tau, mode="sqdist", backend=None):
    """out_i = sum_j softmax_j(logit_ij) * values_j.

    ``mode="sqdist"``: logit_ij = -|q_i - k_j|^2 / tau.
    ``mode="dot"``:    logit_ij = q_i . k_j / tau.
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    q = _points(queries, "queries")
    k = _points(keys, "keys")
    v = _points(values, "values")
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"query width {q.shape[1]} != key width {k.shape[1]}")
    if v.shape[0] != k.shape[0]:
        raise DimensionError(f"{v.shape[0]} value rows for {k.shape[0]} keys")
    return _impl(backend).softmax_smooth(q, k, v, float(tau), MODES[mode])


def pseudo_argmin(queries, keys, mode="sqdist", backend=None):
    """Per query: index of the key minimising |q-k|^2 (sqdist) or -q.k (dot),
    and the gap to the runner-up value."""
    q = _points(queries, "queries")
    k = _points(keys, "keys")
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"query width {q.shape[1]} != key width {k.shape[1]}")
    return _impl(backend).pseudo_argmin(q, k, MODES[mode])
