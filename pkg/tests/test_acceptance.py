"""Acceptance criteria 1-10 at their stated tolerances.

Seeds are fixed so every run sees the same samples.
A summary line per criterion is printed at the end of the pytest run.
"""
import math
import time

import numpy as np
import pytest

from attnlab import classic
from attnlab.errors import PreconditionError
from attnlab.lab import ExperimentConfig, load_config, run_experiment
from attnlab.lab.runner import decay_features
from attnlab.manifold import (
    DensitySpec,
    FieldSpec,
    argmin_pseudo_metric,
    attention_limit_check,
    clustering_decay,
    conformal_identity_check,
    drift_deviation_check,
    laplacian_convergence_check,
    sample_circle,
    zeroth_order_check,
)
from attnlab.attention import DotQK
from attnlab.attention.model import loss_fn
from attnlab.numeric import autodiff as ad
from attnlab.numeric.autodiff import Tensor, grad_check
from attnlab.numeric.rng import RandomSource
from conftest import tiny_ipn

SEED = 20240601
N = 20000
EPS = 0.05
TILT = DensitySpec("cosine-tilt", 0.5)


def report(label, **values):
    print(f"[{label}] " + ", ".join(f"{k}={v}" for k, v in values.items()))


@pytest.mark.acceptance(1, "Laplacian limit on the uniform circle, slope/R2 and improvement when N is quadrupled")
def test_criterion_1_laplacian_convergence():
    t0 = time.perf_counter()
    field = FieldSpec("cos")
    big = laplacian_convergence_check(sample_circle(N, DensitySpec(), SEED), EPS, field)
    small = laplacian_convergence_check(sample_circle(N // 4, DensitySpec(), SEED), EPS, field)
    elapsed = time.perf_counter() - t0
    report("1", slope=big.slope, r2=big.r2, slope_quarter=small.slope, r2_quarter=small.r2, seconds=elapsed)
    assert 0.85 <= big.slope <= 1.15
    assert big.r2 >= 0.9
    assert abs(big.slope - 1) < abs(small.slope - 1)
    assert big.r2 > small.r2
    assert elapsed <= 60


@pytest.mark.acceptance(2, "density drift on the tilted circle")
def test_criterion_2_drift_deviation():
    t0 = time.perf_counter()
    rep = drift_deviation_check(sample_circle(N, TILT, SEED), EPS, FieldSpec("sin"))
    elapsed = time.perf_counter() - t0
    report("2", slope=rep.slope, r2=rep.r2, seconds=elapsed)
    assert 0.8 <= rep.slope <= 1.2
    assert rep.r2 >= 0.85
    assert elapsed <= 60


@pytest.mark.acceptance(3, "one attention step against the drift-diffusion operator")
def test_criterion_3_attention_step():
    rep = attention_limit_check(sample_circle(N, TILT, SEED), EPS, FieldSpec("sin"))
    report("3", slope=rep.slope, r2=rep.r2)
    assert 0.8 <= rep.slope <= 1.2
    assert rep.r2 >= 0.85


@pytest.mark.acceptance(4, "conformal heat identity, analytic derivatives")
def test_criterion_4_conformal_identity():
    err = conformal_identity_check(TILT, FieldSpec("sin"), n=1, method="analytic")
    report("4", max_discrepancy=err)
    assert err <= 1e-10
    with pytest.raises(PreconditionError):
        conformal_identity_check(TILT, FieldSpec("sin"), n=2)


@pytest.mark.acceptance(5, "zeroth-order limit and argmin on the sphere")
def test_criterion_5_zeroth_order_and_argmin():
    cloud = sample_circle(5000, TILT, 3)
    dot = DotQK(Tensor(np.eye(2)), Tensor(np.eye(2)))  # f(x, y) = -x.y
    rep = zeroth_order_check(cloud, dot, FieldSpec("sin"), [0.1, 0.05, 0.025])
    report("5", errors=rep.max_error)
    assert rep.strictly_decreasing
    bound = 2 * (2 * math.pi / 1e4)
    c, s = math.cos(0.7), math.sin(0.7)
    cases = [
        ([1.0, 0.0], [-1.0, -1.0], np.eye(2)),
        ([1.0, 0.0], [2.0, 1.0], np.eye(2)),
        ([0.6, 0.8], [1.5, -0.5], np.array([[c, -s], [s, c]])),
    ]
    for x, a, rot in cases:
        r = argmin_pseudo_metric(x, a, rot, resolution=10_000)
        report("5", x=x, a=a, sign=r.sign, angle_error=r.angle_error)
        assert r.agree and r.angle_error <= bound


@pytest.mark.acceptance(6, "clustering tendency of stacked propagation steps")
def test_criterion_6_clustering_decay():
    spec = {"kind": "random", "n": 200, "dim": 2, "clusters": 1, "separation": 0.0, "spread": 1.0}
    h0, _ = decay_features(spec, SEED)
    traj = clustering_decay(h0, None, eps=0.5, steps=20)
    report("6", ratio=traj.ratio(), floor=traj.floor)
    assert traj.nonincreasing()
    assert traj.ratio() <= 1e-6
    spec = {"kind": "clusters", "n": 100, "dim": 2, "clusters": 2, "separation": 3.0, "spread": 0.3}
    h0, groups = decay_features(spec, SEED)
    traj = clustering_decay(h0, None, eps=0.5, steps=20, groups=groups)
    within, between = traj.rate(traj.within), traj.rate(traj.between)
    report("6", within_rate=within, between_rate=between)
    assert within > 0 and within >= 10 * max(between, 0.0)


@pytest.mark.acceptance(7, "gradient checks: tiny IPN for all kinds, exact on linear models")
@pytest.mark.parametrize("kind", ["dot", "l2", "metric"])
def test_criterion_7_gradients(kind):
    model, x, y = tiny_ipn(kind, seed=1)
    err = grad_check(lambda: loss_fn(model, x, y), model.params())
    rng = RandomSource(2)
    xs = Tensor(rng.normal_matrix(6, 3))
    w = Tensor(rng.normal_matrix(3, 2), requires_grad=True)
    lin = grad_check(lambda: ad.total(xs @ w), [w])
    report("7", kind=kind, ipn_error=err, linear_error=lin)
    assert err <= 1e-4
    assert lin <= 1e-8


@pytest.mark.acceptance(8, "two-moons comparison over 10 seeds: metric attention median/std vs dot and L2")
def test_criterion_8_moons(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "compare-attention"})
    code, rep = run_experiment(cfg, out=tmp_path)
    per = rep["metrics"]["per_kind"]
    for kind, s in per.items():
        report("8", kind=kind, median=s["median"], std=round(s["std"], 4), accs=s["test_acc"])
    report("8", seconds=rep["metrics"]["elapsed_s"])
    m, d, l2 = per["metric"], per["dot"], per["l2"]
    assert len(m["test_acc"]) == 10
    assert m["median"] >= d["median"]
    assert m["median"] >= l2["median"] - 0.01
    assert m["median"] >= 0.90
    assert m["std"] <= d["std"]
    assert rep["metrics"]["elapsed_s"] <= 600
    assert code == 0


def _independent_mcl(w, iters=60):
    n = len(w)
    h = [[float(w[i][j]) + (1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
    for _ in range(iters):
        sq = [[sum(h[i][k] * h[k][j] for k in range(n)) ** 2 for j in range(n)] for i in range(n)]
        h = [[v / sum(row) for v in row] for row in sq]
    return [max(range(n), key=lambda j: (round(h[i][j], 6), -j)) for i in range(n)]


@pytest.mark.acceptance(9, "classic algorithms: MCL, FCM, k-means, KNN")
def test_criterion_9_classic():
    bridged = [[0, 1, 1, 0, 0, 0], [1, 0, 1, 0, 0, 0], [1, 1, 0, 1, 0, 0],
               [0, 0, 1, 0, 1, 1], [0, 0, 0, 1, 0, 1], [0, 0, 0, 1, 1, 0]]
    res = classic.mcl(np.array(bridged, dtype=float))
    oracle = _independent_mcl(bridged)
    assert res.n_clusters == 2 and res.labels.tolist() == [0, 0, 0, 1, 1, 1]
    assert len(set(oracle[:3])) == 1 and len(set(oracle[3:])) == 1 and oracle[0] != oracle[3]

    r = RandomSource(SEED)
    x = np.concatenate([r.normal_matrix(100, 2, 0.1), 10.0 + r.normal_matrix(100, 2, 0.1)])
    y = np.repeat([0, 1], 100)
    fcm = classic.fuzzy_c_means(x, 2, m=2.0, seed=SEED)
    means = np.array([x[y == g].mean(axis=0) for g in (0, 1)])
    centers = fcm.centers[np.argsort(fcm.centers[:, 0])]
    err = float(np.linalg.norm(centers - means, axis=1).max())
    report("9", fcm_center_error=err, mcl_labels=res.labels.tolist())
    assert err <= 0.2

    for seed in range(20):
        pts = RandomSource(seed).normal_matrix(60, 2)
        for k in (1, 2, 3, 5, 8):
            hist = classic.kmeans(pts, k, seed=seed).history
            assert all(b <= a for a, b in zip(hist, hist[1:]))

    pts = RandomSource(5).normal_matrix(25, 2)
    labels = np.array([0] * 10 + [1] * 15)
    assert np.array_equal(classic.knn_predict(pts, labels, 1, pts), labels)
    assert (classic.knn_predict(pts, labels, 25, pts) == 1).all()


REPRO_CONFIGS = [
    {"experiment": "laplacian-convergence", "manifold": {"n": 3000}},
    {"experiment": "drift-deviation", "manifold": {"n": 3000}},
    {"experiment": "attention-step", "manifold": {"n": 3000}},
    {"experiment": "pde-euler", "grid_size": 128},
    {"experiment": "zeroth-order", "manifold": {"n": 2000}},
    {"experiment": "clustering-decay"},
    {"experiment": "train-ipn", "training": {"epochs": 30, "eval_every": 10}},
    {"experiment": "compare-attention", "seeds": [0, 1], "training": {"epochs": 5, "eval_every": 5}},
    {"experiment": "fuzzy-c-means"},
    {"experiment": "kmeans"},
    {"experiment": "mcl"},
    {"experiment": "knn"},
    {"experiment": "diffusion-map", "manifold": {"n": 200}},
    {"experiment": "moons"},
]


@pytest.mark.acceptance(10, "re-running any report.json reproduces data.csv byte for byte")
@pytest.mark.parametrize("config", REPRO_CONFIGS, ids=[c["experiment"] for c in REPRO_CONFIGS])
def test_criterion_10_reproducibility(tmp_path, config):
    run_experiment(ExperimentConfig.from_dict(config), out=tmp_path / "first", seed=11)
    rerun = load_config(tmp_path / "first" / "report.json")
    run_experiment(rerun, out=tmp_path / "second")
    first = (tmp_path / "first" / "data.csv").read_bytes()
    assert first == (tmp_path / "second" / "data.csv").read_bytes()
    assert first.count(b"\r\n") >= 2
