"""Similarity computation as three composable stages.

Initialise a similarity matrix (metric, QK-dot, local combination, adjacency
power), strengthen it (power or exponential inflation), then normalise it
(row, column, two-side, global). ``run_pipeline`` chains stages described by
a JSON-friendly ``PipelineSpec``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from attnlab.errors import (
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    ParameterError,
)
from attnlab.numeric.linalg import as_matrix, pairwise_sqdist


def _sign(t: float) -> float:
    return float(np.sign(t))


def _check_distance(dist: np.ndarray):
    if dist.shape[0] != dist.shape[1]:
        raise DimensionError(f"distance matrix must be square, got {dist.shape}")
    if (dist < 0).any():
        raise DomainError("distance matrix has negative entries")
    if np.abs(np.diag(dist)).max(initial=0.0) != 0.0:
        raise DomainError("distance matrix must have a zero diagonal")
    if not np.allclose(dist, dist.T, rtol=0, atol=1e-12):
        raise DomainError("distance matrix must be symmetric")


def metric_similarity(dist, c, t: float) -> np.ndarray:
    """D_ij = c_i - sign(t) * dist_ij**t, with sign(0) = 0."""
    dist = as_matrix(dist, "dist")
    _check_distance(dist)
    n = dist.shape[0]
    c = np.broadcast_to(np.asarray(c, dtype=np.float64), (n,))
    s = _sign(t)
    if s == 0.0:
        return np.repeat(c[:, None], n, axis=1).copy()
    off = ~np.eye(n, dtype=bool)
    if t < 0:
        if (dist[off] == 0).any():
            i, j = np.argwhere((dist == 0) & off)[0]
            raise DomainError(f"negative exponent t={t} with zero distance between points {i} and {j}")
        powered = np.zeros_like(dist)
        powered[off] = dist[off] ** t
        # diagonal d(x,x)^t is infinite for t<0; leave the self-similarity at c_i
    else:
        powered = dist ** t
    return c[:, None] - s * powered


def qk_dot_similarity(x, q, k) -> np.ndarray:
    """D_ij = x_i^T Q^T K x_j."""
    x = as_matrix(x, "X")
    q = as_matrix(q, "Q")
    k = as_matrix(k, "K")
    if q.shape != k.shape:
        raise DimensionError(f"Q {q.shape} and K {k.shape} must have the same shape")
    if x.shape[1] != q.shape[1]:
        raise DimensionError(f"points have width {x.shape[1]} but Q expects {q.shape[1]}")
    return (x @ q.T) @ (x @ k.T).T


def local_combination(x, neighbors, reg=1e-9) -> list[np.ndarray]:
    """Affine reconstruction weights of each point from its neighbours.

    Solves min |v_i - sum_j w_ij v_j|^2 subject to sum_j w_ij = 1, with the
    local Gram matrix regularised by ``reg * trace``. Returns one weight
    vector per point, aligned with ``neighbors[i]``.
    """
    x = as_matrix(x, "X")
    weights = []
    for i, nbrs in enumerate(neighbors):
        nbrs = np.asarray(nbrs, dtype=np.int64)
        if nbrs.size == 0:
            raise DegenerateInputError(f"point {i} has no neighbours", index=i)
        if (nbrs == i).any():
            raise ParameterError(f"neighbour list of point {i} contains the point itself")
        z = x[nbrs] - x[i]
        gram = z @ z.T
        tr = np.trace(gram)
        gram = gram + (reg * tr if tr > 0 else reg) * np.eye(len(nbrs))
        w = np.linalg.solve(gram, np.ones(len(nbrs)))
        weights.append(w / w.sum())
    return weights


def local_combination_matrix(x, neighbors, reg=1e-9) -> np.ndarray:
    n = len(neighbors)
    w = np.zeros((n, n))
    for i, (nbrs, row) in enumerate(zip(neighbors, local_combination(x, neighbors, reg))):
        w[i, nbrs] = row
    return w


def knn_lists(x, k: int) -> list[np.ndarray]:
    d = pairwise_sqdist(x)
    np.fill_diagonal(d, np.inf)
    return [np.argsort(row, kind="stable")[:k] for row in d]


def adjacency_power(a, k: int) -> np.ndarray:
    """(A^k)_ij counts weighted k-walks from i to j; k = 0 gives the identity."""
    a = as_matrix(a, "A")
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency matrix must be square, got {a.shape}")
    if (a < 0).any():
        raise DomainError("adjacency matrix has negative entries")
    if k < 0:
        raise ParameterError(f"power must be nonnegative, got {k}")
    out = np.eye(a.shape[0])
    for _ in range(int(k)):
        out = out @ a
    return out


def inflate_power(m, r: float) -> np.ndarray:
    """Elementwise sign(r) * M_ij**r."""
    m = as_matrix(m, "M")
    if float(r) != int(r) and (m < 0).any():
        raise DomainError(f"fractional power r={r} needs nonnegative entries")
    with np.errstate(divide="raise"):
        try:
            out = _sign(r) * m ** r
        except FloatingPointError:
            raise DomainError(f"power r={r} of a zero entry") from None
    return out


def inflate_exp(m, eps) -> np.ndarray:
    """Elementwise exp(M_ij / eps_i) with a per-row scale."""
    m = as_matrix(m, "M")
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (m.shape[0],))
    if (eps == 0).any():
        i = int(np.flatnonzero(eps == 0)[0])
        raise ParameterError(f"exponential inflation scale is zero for row {i}")
    out = np.exp(m / eps[:, None])
    if not np.isfinite(out).all():
        raise DomainError("exponential inflation overflowed")
    return out


def inflate(m, mode: str, param) -> np.ndarray:
    if mode == "power":
        return inflate_power(m, param)
    if mode == "exp":
        return inflate_exp(m, param)
    raise ParameterError(f"unknown inflation mode {mode!r}")


def _nonzero(sums, what):
    bad = np.flatnonzero(sums == 0)
    if bad.size:
        raise DegenerateInputError(f"{what} {int(bad[0])} sums to zero", index=int(bad[0]))


def normalize(m, mode: str) -> np.ndarray:
    m = as_matrix(m, "M")
    if (m < 0).any():
        raise DomainError("normalisation needs nonnegative entries")
    if mode == "row":
        rs = m.sum(axis=1)
        _nonzero(rs, "row")
        return m / rs[:, None]
    if mode == "col":
        cs = m.sum(axis=0)
        _nonzero(cs, "column")
        return m / cs[None, :]
    if mode == "two-side":
        if m.shape[0] != m.shape[1]:
            raise DimensionError("two-side normalisation needs a square matrix")
        rs = m.sum(axis=1)
        _nonzero(rs, "row")
        return m / (rs[:, None] * rs[None, :])
    if mode == "global":
        total = m.sum()
        if total == 0:
            raise DegenerateInputError("matrix sums to zero")
        return m / total
    raise ParameterError(f"unknown normalisation mode {mode!r}")


INIT_STAGES = ("metric-init", "qk-init", "local-combination-init", "adjacency-power-init")
STAGES = INIT_STAGES + ("inflate-power", "inflate-exp", "normalize")


@dataclass
class PipelineSpec:
    """Ordered stages; each is ``{"op": <stage name>, **params}``.

    Stage parameters:
      metric-init: t, c (scalar or list), optional "distance" = "euclidean" | "precomputed"
      qk-init: Q, K (nested lists)
      local-combination-init: k (neighbours)
      adjacency-power-init: k
      inflate-power: r
      inflate-exp: eps (scalar or per-row list)
      normalize: mode
    """

    stages: list[dict[str, Any]] = field(default_factory=list)

    def validate(self):
        if not self.stages:
            raise ParameterError("pipeline has no stages")
        for pos, st in enumerate(self.stages):
            op = st.get("op")
            if op not in STAGES:
                raise ParameterError(f"stage {pos}: unknown op {op!r}")
            if (op in INIT_STAGES) != (pos == 0):
                raise ParameterError("exactly one init stage is allowed and it must come first")
        return self

    def to_dict(self):
        return {"stages": [dict(s) for s in self.stages]}

    @classmethod
    def from_dict(cls, d):
        return cls(stages=[dict(s) for s in d["stages"]]).validate()


def diffusion_map_spec(eps: float) -> PipelineSpec:
    """Squared-distance init, exp(-d^2/eps) strengthening, two-side then row normalisation."""
    return PipelineSpec(
        [
            {"op": "metric-init", "c": 0.0, "t": 2},
            {"op": "inflate-exp", "eps": eps},
            {"op": "normalize", "mode": "two-side"},
            {"op": "normalize", "mode": "row"},
        ]
    ).validate()


def _apply_init(st, data):
    op = st["op"]
    if op == "metric-init":
        if st.get("distance", "euclidean") == "precomputed":
            dist = as_matrix(data, "dist")
        else:
            dist = np.sqrt(pairwise_sqdist(data))
        return metric_similarity(dist, st.get("c", 0.0), st["t"])
    if op == "qk-init":
        return qk_dot_similarity(data, st["Q"], st["K"])
    if op == "local-combination-init":
        return local_combination_matrix(data, knn_lists(data, st["k"]))
    return adjacency_power(data, st["k"])


def run_pipeline(spec: PipelineSpec, data) -> np.ndarray:
    spec.validate()
    m = _apply_init(spec.stages[0], data)
    for st in spec.stages[1:]:
        op = st["op"]
        if op == "inflate-power":
            m = inflate_power(m, st["r"])
        elif op == "inflate-exp":
            m = inflate_exp(m, st["eps"])
        else:
            m = normalize(m, st["mode"])
    return m


def _stationary(s, tol=1e-13, max_iter=100000):
    lazy = 0.5 * (s + np.eye(s.shape[0]))
    pi = np.full(s.shape[0], 1.0 / s.shape[0])
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.abs(nxt - pi).max() <= tol:
            return nxt
        pi = nxt
    return pi


def top_eigenvectors(s, k: int, degrees=None, tol=1e-8, max_iter=10_000, seed=0):
    """Leading k eigenpairs (descending eigenvalues) by orthogonal iteration.

    A symmetric ``s`` is used directly. A row-stochastic ``s = D^-1 W`` with
    symmetric W is conjugated to ``D^1/2 S D^-1/2``; pass ``degrees`` (the
    diagonal of D) or let it be recovered from the stationary distribution of
    a reversible chain. Returns (values, vectors) with vectors as columns, in
    the coordinates of ``s``.
    """
    s = as_matrix(s, "S")
    n = s.shape[0]
    if s.shape[1] != n:
        raise DimensionError(f"matrix must be square, got {s.shape}")
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    if np.allclose(s, s.T, rtol=0, atol=1e-12):
        a, back = 0.5 * (s + s.T), None
    else:
        if degrees is None:
            if (s < 0).any() or not np.allclose(s.sum(axis=1), 1.0, atol=1e-10):
                raise ParameterError("non-symmetric input must be row-stochastic")
            degrees = _stationary(s)
            flow = degrees[:, None] * s
            if not np.allclose(flow, flow.T, rtol=0, atol=1e-10):
                raise ParameterError("row-stochastic input is not reversible; pass degrees")
        d = np.asarray(degrees, dtype=np.float64)
        if (d <= 0).any():
            raise ParameterError("degrees must be positive")
        r = np.sqrt(d)
        a = r[:, None] * s / r[None, :]
        a = 0.5 * (a + a.T)
        back = 1.0 / r
    # shift so that eigenvalues are nonnegative: largest-magnitude = largest-value
    shift = np.abs(a).sum(axis=1).max()
    b = a + shift * np.eye(n)
    from attnlab.numeric.rng import RandomSource

    q, _ = np.linalg.qr(RandomSource(seed).normal_matrix(n, k))
    residual = np.inf
    for _ in range(max_iter):
        z = b @ q
        q, _ = np.linalg.qr(z)
        t = q.T @ a @ q
        vals, rot = np.linalg.eigh(0.5 * (t + t.T))
        order = np.argsort(vals)[::-1]
        vals, rot = vals[order], rot[:, order]
        ritz = q @ rot
        residual = np.abs(a @ ritz - ritz * vals).max()
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"orthogonal iteration did not converge in {max_iter} steps (residual {residual:.3e})",
            residual=residual,
        )
    if back is not None:
        ritz = back[:, None] * ritz
        ritz = ritz / np.linalg.norm(ritz, axis=0)
    return vals, ritz
