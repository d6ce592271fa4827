"""Dense float64 matrix helpers.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64 in C order.
"""
from __future__ import annotations

import numpy as np

from attnlab.errors import DimensionError, ParameterError


def as_matrix(a, name="matrix") -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ParameterError(f"{name} contains non-finite entries")
    return m


def _check_finite(m: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(m).all():
        raise FloatingPointError(f"{op} produced non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return _check_finite(a @ b, "matmul")


def row_softmax(m, temperature=1.0, _allow_negative=False) -> np.ndarray:
    """exp(M_ij / T) / sum_k exp(M_ik / T), with the row max subtracted first."""
    if not (temperature > 0 or (_allow_negative and temperature < 0)):
        raise ParameterError(f"temperature must be positive, got {temperature}")
    m = as_matrix(m, "M")
    z = m * (1.0 / temperature)
    z -= z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def pairwise_sqdist(x) -> np.ndarray:
    """Squared Euclidean distances between rows, via the Gram expansion."""
    x = as_matrix(x, "X")
    sq = np.einsum("ij,ij->i", x, x)
    d = x @ x.T
    d *= -2.0
    d += sq[:, None]
    d += sq[None, :]
    # symmetrise exactly; BLAS need not return a bitwise-symmetric Gram matrix
    d += d.T.copy()
    d *= 0.5
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(as_matrix(a).T)


def add(a, b) -> np.ndarray:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape != b.shape:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}")
    return _check_finite(a + b, "add")


def scale(a, c: float) -> np.ndarray:
    return _check_finite(as_matrix(a) * float(c), "scale")
