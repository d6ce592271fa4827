import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attnlab import simkit
from attnlab.errors import (ConvergenceError, DegenerateInputError, DimensionError, DomainError,
                            ParameterError)
from attnlab.numeric.linalg import pairwise_sqdist
from attnlab.numeric.rng import RandomSource


def two_points(d):
    return np.array([[0.0, d], [d, 0.0]])


def test_metric_similarity_examples():
    assert simkit.metric_similarity(two_points(1.0), 0.0, 2)[0, 1] == -1.0
    assert np.array_equal(simkit.metric_similarity(two_points(3.0), 1.5, 0), np.full((2, 2), 1.5))
    assert simkit.metric_similarity(two_points(2.0), 0.0, -1)[0, 1] == pytest.approx(0.5)


def test_metric_similarity_negative_t_zero_distance():
    d = np.zeros((3, 3))
    d[0, 1] = d[1, 0] = 1.0
    d[0, 2] = d[2, 0] = 1.0
    with pytest.raises(DomainError, match="1 and 2"):
        simkit.metric_similarity(d, 0.0, -1)


def test_metric_similarity_rejects_bad_distance():
    with pytest.raises(ValueError):
        simkit.metric_similarity([[0.0, 1.0], [2.0, 0.0]], 0.0, 1)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (5, 2), elements=st.floats(-10, 10)), st.floats(0.1, 3.0))
def test_metric_similarity_symmetric_for_constant_c(x, t):
    d = np.sqrt(pairwise_sqdist(x))
    s = simkit.metric_similarity(d, 0.7, t)
    assert np.allclose(s, s.T)


def test_qk_dot_examples():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    s = simkit.qk_dot_similarity(x, np.eye(2), np.eye(2))
    assert s[0, 1] == 0.0 and s[0, 0] == 1.0
    y = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert simkit.qk_dot_similarity(y, 2 * np.eye(2), np.eye(2))[0, 1] == 2.0
    with pytest.raises(DimensionError):
        simkit.qk_dot_similarity(x, np.eye(2), np.eye(3))


def test_local_combination_examples():
    x = np.array([[0.5, 0.5], [0.0, 0.0], [1.0, 1.0]])
    (w,) = simkit.local_combination(x, [[1, 2]])
    assert np.allclose(w, [0.5, 0.5])
    x = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    (w,) = simkit.local_combination(x, [[1, 2]])
    assert np.allclose(w, [1.0, 0.0], atol=1e-6)


def test_local_combination_triangle_interior():
    r = RandomSource(4)
    tri = r.normal_matrix(3, 2)
    bary = r.uniforms(3)
    bary /= bary.sum()
    v = bary @ tri
    x = np.vstack([v, tri])
    (w,) = simkit.local_combination(x, [[1, 2, 3]])
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.linalg.norm(v - w @ tri) <= 1e-8


def test_local_combination_errors():
    x = np.zeros((2, 2))
    with pytest.raises(DegenerateInputError):
        simkit.local_combination(x, [[], [0]])
    with pytest.raises(ParameterError):
        simkit.local_combination(x, [[0], [0]])


def walk_count(a, k, i, j):
    n = len(a)
    total = 0
    for mid in itertools.product(range(n), repeat=k - 1):
        path = (i, *mid, j)
        w = 1
        for u, v in zip(path, path[1:]):
            w *= a[u][v]
        total += w
    return total


def test_adjacency_power_examples():
    path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    assert np.array_equal(simkit.adjacency_power(path, 1), path)
    assert simkit.adjacency_power(path, 2)[0, 2] == 1
    tri = np.ones((3, 3)) - np.eye(3)
    assert np.array_equal(np.diag(simkit.adjacency_power(tri, 2)), [2, 2, 2])
    with pytest.raises(DomainError):
        simkit.adjacency_power(-path, 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_adjacency_power_counts_walks(n, k, seed):
    r = RandomSource(seed)
    a = (r.uniforms(n * n).reshape(n, n) < 0.5).astype(float)
    a = np.triu(a, 1)
    a = a + a.T
    p = simkit.adjacency_power(a, k)
    for i in range(n):
        for j in range(n):
            assert p[i, j] == walk_count(a.astype(int).tolist(), k, i, j)


def test_inflate_examples():
    m = np.array([[0.3, 2.0], [1.0, 4.0]])
    assert np.array_equal(simkit.inflate(m, "power", 1), m)
    assert simkit.inflate_power([[2.0]], 2)[0, 0] == 4.0
    assert simkit.inflate_exp([[0.0]], [1.0])[0, 0] == 1.0
    with pytest.raises(ParameterError):
        simkit.inflate_exp(m, [1.0, 0.0])
    with pytest.raises(DomainError):
        simkit.inflate_power([[-1.0]], 0.5)


def test_normalize_examples():
    assert np.allclose(simkit.normalize([[1.0, 3.0]], "row"), [[0.25, 0.75]])
    ones = np.ones((2, 2))
    assert np.allclose(simkit.normalize(ones, "global"), 0.25)
    assert np.allclose(simkit.normalize(ones, "two-side"), 0.25)
    assert np.allclose(simkit.normalize([[1.0, 3.0], [1.0, 1.0]], "col"), [[0.5, 0.75], [0.5, 0.25]])


def test_normalize_degenerate_names_index():
    with pytest.raises(DegenerateInputError) as err:
        simkit.normalize([[1.0, 1.0], [0.0, 0.0]], "row")
    assert err.value.index == 1
    with pytest.raises(DegenerateInputError):
        simkit.normalize(np.zeros((2, 2)), "global")
    with pytest.raises(DomainError):
        simkit.normalize([[-1.0]], "row")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(1e-3, 1e6)))
def test_row_normalize_sums(m):
    assert np.abs(simkit.normalize(m, "row").sum(axis=1) - 1).max() <= 1e-12


def test_pipeline_row_stochastic_and_monotone():
    x = np.array([[0.0], [1.0], [3.0]])
    s = simkit.run_pipeline(simkit.diffusion_map_spec(1.0), x)
    assert np.abs(s.sum(axis=1) - 1).max() <= 1e-12
    # the nearest pair (0, 1) has the largest off-diagonal entry in rows 0 and 1
    assert s[0, 1] > s[0, 2] and s[1, 0] > s[1, 2]


def test_pipeline_equals_manual_composition():
    x = RandomSource(6).normal_matrix(8, 2)
    spec = simkit.diffusion_map_spec(0.5)
    m = simkit.metric_similarity(np.sqrt(pairwise_sqdist(x)), 0.0, 2)
    m = simkit.inflate_exp(m, 0.5)
    m = simkit.normalize(m, "two-side")
    m = simkit.normalize(m, "row")
    assert np.array_equal(simkit.run_pipeline(spec, x), m)


def test_pipeline_spec_validation_and_round_trip():
    spec = simkit.diffusion_map_spec(0.1)
    assert simkit.PipelineSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()
    with pytest.raises(ParameterError):
        simkit.PipelineSpec([{"op": "normalize", "mode": "row"}]).validate()
    with pytest.raises(ParameterError):
        simkit.PipelineSpec([{"op": "metric-init", "t": 2}, {"op": "qk-init"}]).validate()
    with pytest.raises(ParameterError):
        simkit.PipelineSpec([{"op": "blur"}]).validate()


def test_pipeline_other_inits():
    x = RandomSource(7).normal_matrix(6, 2)
    s = simkit.run_pipeline(simkit.PipelineSpec([{"op": "local-combination-init", "k": 3}]), x)
    assert np.allclose(s.sum(axis=1), 1.0)
    s = simkit.run_pipeline(simkit.PipelineSpec([{"op": "qk-init", "Q": np.eye(2), "K": np.eye(2)}]), x)
    assert np.allclose(s, x @ x.T)


def test_top_eigenvectors_identity():
    vals, _ = simkit.top_eigenvectors(np.eye(4), 3)
    assert np.allclose(vals, 1.0)


def test_top_eigenvectors_row_stochastic():
    x = RandomSource(8).normal_matrix(30, 2)
    s = simkit.run_pipeline(simkit.diffusion_map_spec(1.0), x)
    vals, vecs = simkit.top_eigenvectors(s, 3)
    assert abs(vals[0] - 1.0) <= 1e-8
    v = vecs[:, 0] / vecs[0, 0]
    assert np.allclose(v, 1.0, atol=1e-6)
    assert (np.diff(vals) <= 1e-12).all()
    assert np.allclose(s @ vecs, vecs * vals, atol=1e-6)


def test_top_eigenvectors_block_diagonal_characteristic_polynomial():
    a, b, c, d = 0.3, 0.2, 0.6, 0.1
    s = np.zeros((4, 4))
    s[:2, :2] = [[1 - a, a], [b, 1 - b]]
    s[2:, 2:] = [[1 - c, c], [d, 1 - d]]
    # det(lambda I - S) = (l - 1)(l - (1 - a - b)) (l - 1)(l - (1 - c - d)), expanded by hand
    poly = np.polymul(np.polymul([1, -1], [1, -(1 - a - b)]), np.polymul([1, -1], [1, -(1 - c - d)]))
    roots = np.sort(np.roots(poly).real)[::-1]
    vals, _ = simkit.top_eigenvectors(s, 4, degrees=[b, a, d, c])
    assert np.allclose(vals, roots, atol=1e-8)
    assert np.sum(np.abs(vals - 1.0) <= 1e-8) == 2


def test_top_eigenvectors_errors():
    with pytest.raises(ParameterError):
        simkit.top_eigenvectors(np.eye(3), 4)
    with pytest.raises(ConvergenceError) as err:
        simkit.top_eigenvectors(np.diag([1.0, 1.0 - 1e-9, 0.5]), 1, max_iter=3)
    assert err.value.residual > 0
