"""Pure numpy versions of the compiled kernels, processed in row blocks."""
from __future__ import annotations

import numpy as np

MODE_SQDIST = 0
MODE_DOT = 1

_BLOCK_ELEMS = 1 << 21


def _scores(q, keys, mode):
    # accumulate per coordinate in index order, matching the compiled loop
    s = np.zeros((q.shape[0], keys.shape[0]))
    if mode == MODE_SQDIST:
        for k in range(q.shape[1]):
            diff = q[:, k, None] - keys[None, :, k]
            s += diff * diff
    else:
        for k in range(q.shape[1]):
            s += q[:, k, None] * keys[None, :, k]
    return s


def softmax_smooth(queries, keys, values, tau, mode):
    n, m = queries.shape[0], keys.shape[0]
    out = np.empty((n, values.shape[1]))
    block = max(1, _BLOCK_ELEMS // max(m, 1))
    for start in range(0, n, block):
        stop = min(n, start + block)
        s = _scores(queries[start:stop], keys, mode)
        logits = -s / tau if mode == MODE_SQDIST else s / tau
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        out[start:stop] = (w @ values) / w.sum(axis=1, keepdims=True)
    return out


def pseudo_argmin(queries, keys, mode):
    n, m = queries.shape[0], keys.shape[0]
    idx = np.empty(n, dtype=np.int64)
    gap = np.empty(n)
    block = max(1, _BLOCK_ELEMS // max(m, 1))
    for start in range(0, n, block):
        stop = min(n, start + block)
        s = _scores(queries[start:stop], keys, mode)
        if mode == MODE_DOT:
            s = -s
        best = np.argmin(s, axis=1)
        rows = np.arange(stop - start)
        lo = s[rows, best]
        s[rows, best] = np.inf
        idx[start:stop] = best
        gap[start:stop] = s.min(axis=1) - lo if m > 1 else np.inf
    return idx, gap
