import json

import numpy as np
import pytest

from attnlab.attention import (
    Block,
    DotQK,
    Head,
    IPNModel,
    L2Linear,
    MetricMLP,
    MultiHeadSpec,
    TrainConfig,
    build_ipn,
    evaluate,
    multi_head_propagate,
    propagate,
    pseudo_metric_matrix,
    train_ipn,
)
from attnlab.attention.model import loss_fn
from attnlab.attention.train import train_step
from attnlab.errors import DegenerateInputError, DimensionError, ParameterError, TrainingDiverged
from attnlab.lab.datasets import MoonSpec, generate_moons
from attnlab.numeric.autodiff import Tensor, grad_check
from attnlab.numeric.linalg import pairwise_sqdist
from attnlab.numeric.optim import AdamState
from attnlab.numeric.rng import RandomSource
from conftest import tiny_ipn

KINDS = ["dot", "l2", "metric"]


def features(n=7, d=3, seed=0):
    return RandomSource(seed).normal_matrix(n, d)


def test_dot_identity_on_identical_unit_rows():
    h = np.tile([[0.6, 0.8]], (3, 1))
    f = pseudo_metric_matrix(h, DotQK(Tensor(np.eye(2)), Tensor(np.eye(2))))
    assert np.allclose(f, -1.0)


def test_l2_identity_is_sqdist():
    h = features()
    assert np.allclose(pseudo_metric_matrix(h, L2Linear.identity(3)), pairwise_sqdist(h))


def test_metric_mlp_zero_weights_is_sqdist():
    h = features()
    assert np.allclose(pseudo_metric_matrix(h, MetricMLP.zeros(3, 5)), pairwise_sqdist(h))


def test_metric_mlp_bias_b2_cancels():
    h = features()
    r = RandomSource(1)
    kind = MetricMLP.init(3, 4, r, zero_output=False)
    before = pseudo_metric_matrix(h, kind)
    kind.b2.value[...] = 5.0
    assert np.allclose(pseudo_metric_matrix(h, kind), before)
    assert kind.b2 not in kind.params()


def test_pseudo_metric_width_mismatch():
    with pytest.raises(DimensionError):
        pseudo_metric_matrix(features(d=4), L2Linear.identity(3))


@pytest.mark.parametrize("kind_name", KINDS)
def test_propagate_single_token_identity(kind_name):
    kind = build_ipn(kind_name, 2, 3, 2, seed=1, qk_dim=3, mlp_width=3).blocks[0].kind
    h = features(1, 3)
    assert np.allclose(propagate(h, kind).value, h)


@pytest.mark.parametrize("kind_name", KINDS)
def test_propagate_permutation_equivariant(kind_name):
    model, _, _ = tiny_ipn(kind_name, seed=2)
    kind = model.blocks[0].kind
    h = features(6, 4, seed=3)
    perm = RandomSource(4).permutation(6)
    assert np.allclose(propagate(h[perm], kind).value, propagate(h, kind).value[perm], atol=1e-14)


def test_identical_tokens_identical_outputs():
    model, _, _ = tiny_ipn("metric", seed=5)
    h = features(5, 4, seed=6)
    h[3] = h[1]
    out = propagate(h, model.blocks[0].kind).value
    assert np.allclose(out[3], out[1])


def test_multi_head_reductions():
    h = features(6, 3)
    kind = L2Linear.init(3, 3, RandomSource(7))
    single = propagate(h, kind).value
    eye = Tensor(np.eye(3))
    assert np.allclose(multi_head_propagate(h, MultiHeadSpec([Head(kind, eye)])).value, single)
    zero = Head(DotQK.init(3, 2, RandomSource(8)), Tensor(np.zeros((3, 3))))
    assert np.allclose(multi_head_propagate(h, MultiHeadSpec([Head(kind, eye), zero])).value, single)
    third = Tensor(np.eye(3) / 3)
    spec = MultiHeadSpec([Head(kind, third)] * 3)
    assert np.allclose(multi_head_propagate(h, spec).value, single)
    with pytest.raises(ParameterError):
        MultiHeadSpec([]).validate()


def test_model_validation():
    with pytest.raises(ParameterError):
        build_ipn("dot", 2, 4, 2, n_blocks=0)
    with pytest.raises(ParameterError):
        build_ipn("gat", 2, 4, 2)
    m = build_ipn("l2", 2, 4, 2)
    with pytest.raises(DimensionError):
        m.forward(np.zeros((3, 5)))


def test_identical_inputs_identical_logits():
    m = build_ipn("metric", 2, 4, 2, n_blocks=1, seed=3)
    logits = m.forward(np.tile([[0.2, -0.4]], (4, 1))).value
    assert np.allclose(logits, logits[0])


def test_zero_linear_maps_zero_logits():
    m = build_ipn("dot", 2, 4, 2, seed=3)
    for p in (m.w_in, m.b_in, m.w_out, m.b_out):
        p.value[...] = 0.0
    assert np.array_equal(m.forward(features(5, 2)).value, np.zeros((5, 2)))


@pytest.mark.parametrize("kind", KINDS)
def test_tiny_ipn_gradient_check(kind):
    model, x, y = tiny_ipn(kind, seed=11)
    assert grad_check(lambda: loss_fn(model, x, y), model.params()) <= 1e-4


@pytest.mark.parametrize("kind", KINDS)
def test_single_adam_step_decreases_loss(kind):
    train, _ = generate_moons(MoonSpec(n_train=100, n_test=10, seed=0))
    model = build_ipn(kind, 2, 10, 2, seed=0, qk_dim=10, mlp_width=10)
    before = train_step(model, train.x, train.y, AdamState.for_params(model.params()), 1e-4, 1e-4)
    after = loss_fn(model, train.x, train.y).item()
    assert after < before


def test_training_deterministic_and_snapshot_round_trip():
    train, test = generate_moons(MoonSpec(n_train=60, n_test=20, seed=1))
    cfg = TrainConfig(lr=1e-2, epochs=15, eval_every=5, seed=1)

    def run():
        m = build_ipn("metric", 2, 6, 2, seed=1, mlp_width=4)
        return train_ipn(m, (train.x, train.y), (test.x, test.y), cfg)

    h1, m1 = run()
    h2, m2 = run()
    assert json.dumps(h1) == json.dumps(h2)
    assert [r["epoch"] for r in h1] == [5, 10, 15]
    assert m1.to_json() == m2.to_json()
    fresh = build_ipn("metric", 2, 6, 2, seed=99, mlp_width=4).load_json(m1.to_json())
    assert np.array_equal(fresh.forward(test.x).value, m1.forward(test.x).value)
    with pytest.raises(ParameterError):
        build_ipn("dot", 2, 6, 2).load_json(m1.to_json())


def test_training_divergence_reports_norms():
    train, _ = generate_moons(MoonSpec(n_train=20, n_test=4, seed=0))
    m = build_ipn("l2", 2, 4, 2)
    m.w_in.value[0, 0] = np.inf
    with pytest.raises(TrainingDiverged) as err:
        train_step(m, train.x, train.y, AdamState.for_params(m.params()), 1e-3, 0.0)
    assert "input.weight" in err.value.param_norms


def test_evaluate_cases():
    m = build_ipn("dot", 2, 4, 2, seed=4)
    x = features(10, 2)
    pred = np.argmax(m.forward(x).value, axis=1)
    assert evaluate(m, x, pred) == 1.0
    m.w_out.value[...] = 0.0
    m.b_out.value[...] = [[1.0, 0.0]]
    y = np.array([0] * 7 + [1] * 3)
    assert evaluate(m, x, y) == 0.7
    with pytest.raises(DegenerateInputError):
        evaluate(m, x[:0], y[:0])


def test_train_config_validation():
    with pytest.raises(ParameterError):
        TrainConfig(lr=0.0)
    with pytest.raises(ParameterError):
        TrainConfig(epochs=0)
