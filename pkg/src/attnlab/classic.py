"""Fuzzy c-means, k-means, Markov clustering and KNN written in terms of
similarity operators (metric init, inflation, normalisation)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from attnlab.errors import DegenerateInputError, DimensionError, ParameterError
from attnlab.numeric.linalg import as_matrix
from attnlab.numeric.rng import RandomSource
from attnlab.simkit import inflate_power, normalize

FCM_DISTANCE_FLOOR = 1e-12


@dataclass
class ClusterResult:
    labels: np.ndarray
    centers: np.ndarray | None = None
    membership: np.ndarray | None = None
    iterations: int = 0
    converged: bool = False
    probabilities: np.ndarray | None = None
    history: list[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "labels": arr(self.labels),
            "centers": arr(self.centers),
            "membership": arr(self.membership),
            "probabilities": arr(self.probabilities),
            "iterations": self.iterations,
            "converged": self.converged,
            "history": [float(h) for h in self.history],
        }


def _sqdist(a, b):
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def kmeanspp_init(x, k: int, rng: RandomSource) -> np.ndarray:
    n = x.shape[0]
    chosen = [rng.below(n)]
    d2 = _sqdist(x, x[chosen[0]][None, :])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total == 0:
            raise DegenerateInputError(f"fewer than {k} distinct points")
        u = rng.uniform() * total
        j = int(np.searchsorted(np.cumsum(d2), u, side="right"))
        j = min(j, n - 1)
        while d2[j] == 0:  # never pick a point already covered
            j = (j + 1) % n
        chosen.append(j)
        d2 = np.minimum(d2, _sqdist(x, x[j][None, :])[:, 0])
    return x[chosen].copy()


def fcm_similarity(centers, x, m: float):
    """Return (P, S): P = N_c(D) class probabilities per point, S = N_r(P).

    D_ij = max(|c_i - x_j|, 1e-12) ** (-2 / (m - 1)).
    """
    dist = np.sqrt(_sqdist(centers, x))
    dist = np.maximum(dist, FCM_DISTANCE_FLOOR)
    # scale each column by its smallest distance before the power so that
    # tiny clamped distances cannot overflow; column normalisation removes it
    dist = dist / dist.min(axis=0, keepdims=True)
    d = dist ** (-2.0 / (m - 1.0))
    p = normalize(d, "col")
    return p, normalize(p, "row")


def fuzzy_c_means(x, n_classes: int, m: float = 2.0, max_iter: int = 300, tol: float = 1e-9,
                  seed: int = 0, init_centers=None) -> ClusterResult:
    x = as_matrix(x, "X")
    if not m > 1:
        raise ParameterError(f"fuzzifier m must exceed 1, got {m}")
    if n_classes > x.shape[0]:
        raise ParameterError(f"{n_classes} classes for {x.shape[0]} points")
    if init_centers is None:
        centers = kmeanspp_init(x, n_classes, RandomSource(seed).derive("fcm/init"))
    else:
        centers = as_matrix(init_centers, "init_centers").copy()
        if centers.shape != (n_classes, x.shape[1]):
            raise DimensionError(f"init centers must be {n_classes}x{x.shape[1]}")
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p, s = fcm_similarity(centers, x, m)
        new = s @ x
        shift = float(np.abs(new - centers).max())
        history.append(shift)
        centers = new
        if shift <= tol:
            converged = True
            break
    p, s = fcm_similarity(centers, x, m)
    return ClusterResult(
        labels=np.argmax(p, axis=0),
        centers=centers,
        membership=s,
        probabilities=p,
        iterations=it,
        converged=converged,
        history=history,
    )


def kmeans(x, k: int, max_iter: int = 300, tol: float = 0.0, seed: int = 0) -> ClusterResult:
    """Lloyd iterations; ``history`` holds the cost after each assignment."""
    x = as_matrix(x, "X")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    centers = kmeanspp_init(x, k, RandomSource(seed).derive("kmeans/init"))
    history = []
    converged = False
    it = 0
    labels = np.zeros(n, dtype=np.int64)
    for it in range(1, max_iter + 1):
        d = _sqdist(x, centers)
        labels = np.argmin(d, axis=1)  # first minimum -> lowest centre index
        history.append(float(d[np.arange(n), labels].sum()))
        new = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new[c] = x[members].mean(axis=0)
        for c in range(k):
            if not (labels == c).any():
                # re-seed an empty cluster at the point farthest from its own centre
                own = ((x - new[labels]) ** 2).sum(axis=1)
                far = int(np.argmax(own))
                new[c] = x[far]
                labels[far] = c
        shift = float(np.abs(new - centers).max())
        centers = new
        if shift <= tol:
            converged = True
            break
    d = _sqdist(x, centers)
    labels = np.argmin(d, axis=1)
    return ClusterResult(labels=labels, centers=centers, iterations=it, converged=converged,
                         history=history)


def _argmax_tol(row, tol):
    return int(np.flatnonzero(row >= row.max() - tol)[0])


def mcl(w, max_iter: int = 100, tol: float = 1e-12, agreement_tol: float = 1e-6) -> ClusterResult:
    """H1 = W (self-loops added where the diagonal is zero); H_{k+1} = N_r(Gamma_2(H_k^2))."""
    w = as_matrix(w, "W")
    n = w.shape[0]
    if w.shape[1] != n:
        raise DimensionError(f"weight matrix must be square, got {w.shape}")
    if (w < 0).any():
        raise ParameterError("weights must be nonnegative")
    if not np.allclose(w, w.T, rtol=0, atol=1e-12):
        raise ParameterError("weight matrix must be symmetric")
    h = w.copy()
    zero_diag = np.diag(h) == 0
    h[zero_diag, zero_diag] = 1.0
    zero_rows = np.flatnonzero(h.sum(axis=1) == 0)
    if zero_rows.size:
        raise DegenerateInputError(f"node {int(zero_rows[0])} has no edges", index=int(zero_rows[0]))
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        nxt = normalize(inflate_power(h @ h, 2), "row")
        delta = float(np.abs(nxt - h).max())
        history.append(delta)
        h = nxt
        if delta <= tol:
            converged = True
            break
    attractors = [_argmax_tol(row, agreement_tol) for row in h]
    relabel: dict[int, int] = {}
    labels = np.array([relabel.setdefault(a, len(relabel)) for a in attractors], dtype=np.int64)
    return ClusterResult(labels=labels, membership=h, iterations=it, converged=converged,
                         history=history)


def knn_predict(x_train, y_train, k: int, query):
    """Majority label among the k nearest training points (ties to lower index/class).

    The vote is s^T onehot(y) with s the column-normalised 0/1 neighbour
    indicator. A 1-D ``query`` returns an int, a 2-D one an array.
    """
    x_train = as_matrix(x_train, "Xtrain")
    y_train = np.asarray(y_train, dtype=np.int64)
    n = x_train.shape[0]
    if n == 0:
        raise DegenerateInputError("empty training set")
    if y_train.shape != (n,):
        raise DimensionError(f"{y_train.shape[0]} labels for {n} points")
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    single = np.ndim(query) == 1
    q = as_matrix(query, "query")
    onehot = np.zeros((n, int(y_train.max()) + 1))
    onehot[np.arange(n), y_train] = 1.0
    out = np.empty(q.shape[0], dtype=np.int64)
    d = _sqdist(q, x_train)
    for i, row in enumerate(d):
        near = np.argsort(row, kind="stable")[:k]
        a = np.zeros((n, 1))
        a[near] = 1.0
        s = normalize(a, "col")
        out[i] = int(np.argmax(s[:, 0] @ onehot))
    return int(out[0]) if single else out
