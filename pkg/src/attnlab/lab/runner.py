"""Experiment registry and runner.

Each experiment takes a resolved config (defaults merged in) and returns an
``Outcome``: CSV columns and rows, metrics, and named checks built from the
config's ``assertions``. ``run_experiment`` writes ``report.json`` and
``data.csv`` into the output directory and returns the exit status.

CSV columns per experiment:

  laplacian-convergence, drift-deviation, attention-step: point_index, estimate, target
  pde-euler:            grid_index, theta, value, exact
  conformal-identity:   method, grid_size, manifold_dim, max_discrepancy
  argmin-pseudo-metric: component, closed_form, brute_force
  zeroth-order:         eps, max_error
  clustering-decay:     step, variance[, within, between]
  train-ipn:            epoch, train_loss, test_acc
  compare-attention:    attention, seed, test_acc, train_loss
  fuzzy-c-means, kmeans, mcl: point_index, label
  knn:                  query_index, predicted, expected
  diffusion-map:        point_index, phi_0 .. phi_{k-1}
  moons:                split, index, x, y, label
  idx-summary:          index, label, mean_pixel
"""
from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from attnlab import classic, kernels, simkit
from attnlab.attention import DotQK, L2Linear, TrainConfig, build_ipn, train_ipn
from attnlab.errors import ParameterError
from attnlab.lab.config import ExperimentConfig, validate_dict
from attnlab.lab.datasets import LabeledPoints, MoonSpec, generate_moons, load_idx
from attnlab.manifold import (
    DensitySpec,
    FieldSpec,
    argmin_pseudo_metric,
    attention_limit_check,
    clustering_decay,
    conformal_identity_check,
    drift_deviation_check,
    laplacian_convergence_check,
    pde_euler_reference,
    sample,
    zeroth_order_check,
)
from attnlab.numeric.autodiff import Tensor
from attnlab.numeric.rng import RandomSource

REPORT_VERSION = 1
DEFAULT_SEED = 20240601


@dataclass
class Outcome:
    columns: list[str]
    rows: list[dict]
    metrics: dict[str, Any]
    checks: list[dict] = field(default_factory=list)
    seeds: dict[str, Any] = field(default_factory=dict)
    notes: dict[str, Any] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)


@dataclass
class Experiment:
    name: str
    summary: str
    defaults: dict
    assertions: dict
    run: Callable[[dict], Outcome]


REGISTRY: dict[str, Experiment] = {}


def experiment(name, summary, defaults, assertions):
    def deco(fn):
        REGISTRY[name] = Experiment(name, summary, defaults, assertions, fn)
        return fn

    return deco


# ---------------------------------------------------------------- helpers


def _check(name, value, op, threshold) -> dict:
    if op == ">=":
        ok = value >= threshold
    elif op == "<=":
        ok = value <= threshold
    elif op == "==":
        ok = value == threshold
    else:
        raise ValueError(op)
    return {"name": name, "value": value, "op": op, "threshold": threshold, "pass": bool(ok)}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _cloud(cfg):
    m = cfg["manifold"]
    d = m["density"]
    spec = DensitySpec(d["family"], d["a"])
    return sample(m["kind"], m["n"], spec, cfg["seed"]), spec


def _metric(cfg):
    m = cfg.get("metric", {"kind": "sqdist"})
    kind = m.get("kind", "sqdist")
    if kind == "sqdist":
        return None
    if kind == "dot":
        if "Q" not in m or "K" not in m:
            raise ParameterError("a dot metric needs Q and K")
        return DotQK(Tensor(np.array(m["Q"], dtype=float)), Tensor(np.array(m["K"], dtype=float)))
    if "A" not in m:
        raise ParameterError("an l2 metric needs A")
    return L2Linear(Tensor(np.array(m["A"], dtype=float)))


def _regression_outcome(report, cfg):
    a = cfg["assertions"]
    checks = []
    if report.degenerate:
        checks.append(_check("max_abs_estimate", report.max_abs, "<=", a.get("max_abs_max", 1e-8)))
    else:
        checks.append(_check("slope_min", report.slope, ">=", a["slope_min"]))
        checks.append(_check("slope_max", report.slope, "<=", a["slope_max"]))
        checks.append(_check("r2_min", report.r2, ">=", a["r2_min"]))
    metrics = dict(report.summary())
    return Outcome(["point_index", "estimate", "target"], list(report.rows()), metrics, checks,
                   seeds={"sample": cfg["seed"]})


_MANIFOLD_DEFAULTS = {
    "manifold": {"kind": "circle", "n": 20000, "density": {"family": "uniform", "a": 0.0}},
    "eps": 0.05,
}
_TILTED = _merge(_MANIFOLD_DEFAULTS, {"manifold": {"density": {"family": "cosine-tilt", "a": 0.5}},
                                      "field": "sin"})
_SLOPE = {"slope_min": 0.8, "slope_max": 1.2, "r2_min": 0.85}


def _field(cfg):
    kind = cfg["manifold"]["kind"]
    return FieldSpec(cfg.get("field", "cos" if kind == "circle" else "z"), kind)


# ---------------------------------------------------------------- manifold


@experiment(
    "laplacian-convergence",
    "(1/eps) L f against (1/2) Laplacian f on a uniformly sampled circle or sphere",
    _merge(_MANIFOLD_DEFAULTS, {"n_sweep": []}),
    {"slope_min": 0.85, "slope_max": 1.15, "r2_min": 0.9, "sweep_improves": True},
)
def _laplacian(cfg):
    cloud, _ = _cloud(cfg)
    fld = _field(cfg)
    rep = laplacian_convergence_check(cloud, cfg["eps"], fld)
    out = _regression_outcome(rep, cfg)
    sweep = []
    for n in cfg["n_sweep"]:
        sub = _merge(cfg, {"manifold": {"n": n}})
        small, _ = _cloud(sub)
        r = laplacian_convergence_check(small, cfg["eps"], fld)
        sweep.append({"n": n, "slope": r.slope, "r2": r.r2})
    if sweep and not rep.degenerate:
        # every smaller N must be strictly worse than the next larger one
        chain = sorted(sweep, key=lambda s: s["n"]) + [{"n": cloud.n, "slope": rep.slope, "r2": rep.r2}]
        ok = all(
            abs(b["slope"] - 1) < abs(a["slope"] - 1) and b["r2"] > a["r2"]
            for a, b in zip(chain, chain[1:])
        )
        out.metrics["sweep"] = chain
        out.checks.append(_check("sweep_improves", ok, "==", cfg["assertions"]["sweep_improves"]))
    return out


@experiment(
    "drift-deviation",
    "(1/eps) L f against (1/2)(Laplacian f + 2 <grad p/p, grad f>) on a tilted sample",
    _TILTED,
    dict(_SLOPE),
)
def _drift(cfg):
    cloud, _ = _cloud(cfg)
    return _regression_outcome(drift_deviation_check(cloud, cfg["eps"], _field(cfg)), cfg)


@experiment(
    "attention-step",
    "(2/eps)(H_new - H) of one attention step against the drift-diffusion operator",
    _merge(_TILTED, {"metric": {"kind": "sqdist"}}),
    dict(_SLOPE),
)
def _attention_step(cfg):
    cloud, _ = _cloud(cfg)
    rep = attention_limit_check(cloud, cfg["eps"], _field(cfg), _metric(cfg))
    return _regression_outcome(rep, cfg)


_TRIG = re.compile(r"^(cos|sin)(\d*)$")


@experiment(
    "pde-euler",
    "explicit Euler reference for dH/dt = H'' + 2 (p'/p) H' on a periodic grid",
    {"grid_size": 512, "t_final": 0.1, "field": "cos",
     "manifold": {"density": {"family": "uniform", "a": 0.0}}},
    {"max_error_max": 1e-4},
)
def _pde(cfg):
    n = cfg["grid_size"]
    h = 2.0 * math.pi / n
    dt_max = 0.4 * h * h
    dt = cfg.get("dt", dt_max)
    steps = int(math.ceil(cfg["t_final"] / dt)) if cfg["t_final"] > 0 else 0
    dt = cfg["t_final"] / steps if steps else dt
    d = cfg["manifold"]["density"]
    spec = DensitySpec(d["family"], d["a"])
    fld = FieldSpec(cfg["field"], "circle")
    theta, u = pde_euler_reference(n, spec, fld, dt, steps)
    m = _TRIG.match(cfg["field"])
    exact = None
    if spec.tilt == 0.0 and m:
        k = int(m.group(2) or 1)
        exact = fld.on_theta(theta) * math.exp(-k * k * cfg["t_final"])
    rows = [
        {"grid_index": i, "theta": float(t), "value": float(v), "exact": None if exact is None else float(exact[i])}
        for i, (t, v) in enumerate(zip(theta, u))
    ]
    metrics = {"dt": dt, "steps": steps, "stability_bound": dt_max}
    checks = []
    if exact is not None:
        err = float(np.abs(u - exact).max())
        metrics["max_error"] = err
        checks.append(_check("max_error_max", err, "<=", cfg["assertions"]["max_error_max"]))
    return Outcome(["grid_index", "theta", "value", "exact"], rows, metrics, checks)


@experiment(
    "conformal-identity",
    "drift-diffusion operator vs p^k times the Laplacian of the rescaled metric",
    {"manifold": {"density": {"family": "cosine-tilt", "a": 0.5}}, "field": "sin", "manifold_dim": 1,
     "grid_size": 4096, "method": "analytic"},
    {"max_discrepancy_max": 1e-10},
)
def _conformal(cfg):
    d = cfg["manifold"]["density"]
    spec = DensitySpec(d["family"], d["a"])
    err = conformal_identity_check(spec, FieldSpec(cfg["field"], "circle"), cfg["manifold_dim"],
                                   cfg["grid_size"], cfg["method"])
    row = {"method": cfg["method"], "grid_size": cfg["grid_size"], "manifold_dim": cfg["manifold_dim"],
           "max_discrepancy": err}
    checks = [_check("max_discrepancy_max", err, "<=", cfg["assertions"]["max_discrepancy_max"])]
    return Outcome(list(row), [row], {"max_discrepancy": err}, checks)


@experiment(
    "argmin-pseudo-metric",
    "closed-form stationary point of sum a_i x'_i y'_i on the sphere vs grid search",
    {"argmin": {"x": [1.0, 0.0], "a": [-1.0, -1.0], "rotation": [[1.0, 0.0], [0.0, 1.0]],
                "resolution": 10000}},
    {"agree": True},
)
def _argmin(cfg):
    a = cfg["argmin"]
    r = argmin_pseudo_metric(a["x"], a["a"], a["rotation"], a["resolution"])
    rows = [
        {"component": i, "closed_form": float(c), "brute_force": float(b)}
        for i, (c, b) in enumerate(zip(r.closed_form, r.brute_force))
    ]
    metrics = {"sign": r.sign, "angle_error": r.angle_error, "tolerance": r.tolerance, "agree": r.agree}
    return Outcome(["component", "closed_form", "brute_force"], rows, metrics,
                   [_check("agree", r.agree, "==", cfg["assertions"]["agree"])])


@experiment(
    "zeroth-order",
    "max |H_new(x) - H(argmin_y f(x, y))| as eps shrinks",
    _merge(_TILTED, {"manifold": {"n": 5000}, "eps_list": [0.1, 0.05, 0.025],
                     "metric": {"kind": "dot", "Q": [[1.0, 0.0], [0.0, 1.0]], "K": [[1.0, 0.0], [0.0, 1.0]]}}),
    {"strictly_decreasing": True},
)
def _zeroth(cfg):
    cloud, _ = _cloud(cfg)
    rep = zeroth_order_check(cloud, _metric(cfg), _field(cfg), cfg["eps_list"])
    metrics = {"eps": rep.eps, "max_error": rep.max_error, "strictly_decreasing": rep.strictly_decreasing}
    return Outcome(["eps", "max_error"], list(rep.rows()), metrics,
                   [_check("strictly_decreasing", rep.strictly_decreasing, "==",
                           cfg["assertions"]["strictly_decreasing"])],
                   seeds={"sample": cfg["seed"]})


def decay_features(spec: dict, seed: int):
    """Random connected features, or Gaussian clusters spaced along the first axis."""
    rng = RandomSource(seed).derive("features")
    n, dim = spec["n"], spec["dim"]
    if spec["kind"] == "random":
        return rng.normal_matrix(n, dim, spec["spread"]), None
    c = spec["clusters"]
    h = rng.normal_matrix(n * c, dim, spec["spread"])
    groups = np.repeat(np.arange(c), n)
    h[:, 0] += spec["separation"] * (groups - (c - 1) / 2.0)
    return h, groups


@experiment(
    "clustering-decay",
    "feature variance under stacked attention steps",
    {"features": {"kind": "random", "n": 200, "dim": 2, "clusters": 2, "separation": 3.0, "spread": 1.0},
     "eps": 0.5, "steps": 20, "metric": {"kind": "sqdist"}},
    {"nonincreasing": True, "final_ratio_max": 1e-6, "rate_ratio_min": 10.0},
)
def _decay(cfg):
    h0, groups = decay_features(cfg["features"], cfg["seed"])
    traj = clustering_decay(h0, _metric(cfg), cfg["eps"], cfg["steps"], groups)
    a = cfg["assertions"]
    metrics = {"initial": traj.variance[0], "final": traj.variance[-1], "ratio": traj.ratio(),
               "nonincreasing": traj.nonincreasing(), "floor": traj.floor}
    checks = []
    columns = ["step", "variance"]
    if groups is None:
        checks.append(_check("nonincreasing", traj.nonincreasing(), "==", a["nonincreasing"]))
        checks.append(_check("final_ratio_max", traj.ratio(), "<=", a["final_ratio_max"]))
    else:
        columns += ["within", "between"]
        rw, rb = traj.rate(traj.within), traj.rate(traj.between)
        ratio = rw / rb if rb > 0 else (math.inf if rw > 0 else 0.0)
        metrics.update({"within_rate": rw, "between_rate": rb, "rate_ratio": ratio})
        checks.append(_check("rate_ratio_min", ratio, ">=", a["rate_ratio_min"]))
    return Outcome(columns, list(traj.rows()), metrics, checks, seeds={"features": cfg["seed"]})


# ---------------------------------------------------------------- attention


_MOONS = {"kind": "moons", "n_train": 400, "n_test": 100, "noise": 0.2}
_MODEL = {"attention": "metric", "width": 10, "blocks": 2, "eps": 0.5, "qk_dim": 10, "mlp_width": 10}
_TRAINING = {"lr": 1e-3, "weight_decay": 1e-4, "epochs": 800, "eval_every": 10}


def _moons(ds, seed):
    if ds["kind"] != "moons":
        raise ParameterError(f"this experiment needs a moons dataset, got {ds['kind']!r}")
    return generate_moons(MoonSpec(ds["n_train"], ds["n_test"], ds["noise"], seed))


def _fit(kind, cfg, seed):
    train, test = _moons(cfg["dataset"], seed)
    m = cfg["model"]
    model = build_ipn(kind, 2, m["width"], 2, m["blocks"], m["eps"], seed=seed, qk_dim=m["qk_dim"],
                      mlp_width=m["mlp_width"])
    t = cfg["training"]
    history, model = train_ipn(model, (train.x, train.y), (test.x, test.y),
                               TrainConfig(t["lr"], t["weight_decay"], t["epochs"], seed, t["eval_every"]))
    return history, model


@experiment(
    "train-ipn",
    "train one IPN classifier on the two-moons data",
    {"dataset": _MOONS, "model": _MODEL, "training": _TRAINING},
    {"final_test_acc_min": 0.0},
)
def _train(cfg):
    history, model = _fit(cfg["model"]["attention"], cfg, cfg["seed"])
    final = history[-1]
    metrics = {"final_test_acc": final["test_acc"], "final_train_loss": final["train_loss"]}
    checks = [_check("final_test_acc_min", final["test_acc"], ">=", cfg["assertions"]["final_test_acc_min"])]
    return Outcome(["epoch", "train_loss", "test_acc"], history, metrics, checks,
                   seeds={"data": cfg["seed"], "init": cfg["seed"]},
                   artifacts={"model.json": model.to_json()})


@experiment(
    "compare-attention",
    "dot, L2 and metric attention IPNs on two-moons over several seeds",
    {"dataset": _MOONS, "model": _merge(_MODEL, {"kinds": ["dot", "l2", "metric"]}), "training": _TRAINING,
     "seeds": list(range(10))},
    {"metric_median_min": 0.9, "l2_slack": 0.01, "metric_ge_dot": True, "metric_std_le_dot": True,
     "runtime_max_s": 600.0},
)
def _compare(cfg):
    t0 = time.perf_counter()
    rows, accs = [], {}
    for kind in cfg["model"]["kinds"]:
        accs[kind] = []
        for s in cfg["seeds"]:
            history, _ = _fit(kind, cfg, s)
            accs[kind].append(history[-1]["test_acc"])
            rows.append({"attention": kind, "seed": s, "test_acc": history[-1]["test_acc"],
                         "train_loss": history[-1]["train_loss"]})
    elapsed = time.perf_counter() - t0
    summary = {k: {"median": float(np.median(v)), "std": float(np.std(v)), "test_acc": v} for k, v in accs.items()}
    metrics = {"per_kind": summary, "elapsed_s": elapsed}
    a = cfg["assertions"]
    checks = []
    if "metric" in summary:
        med = summary["metric"]["median"]
        checks.append(_check("metric_median_min", med, ">=", a["metric_median_min"]))
        if "dot" in summary:
            checks.append(_check("metric_ge_dot", med >= summary["dot"]["median"], "==", a["metric_ge_dot"]))
            checks.append(_check("metric_std_le_dot", summary["metric"]["std"] <= summary["dot"]["std"], "==",
                                 a["metric_std_le_dot"]))
        if "l2" in summary:
            checks.append(_check("metric_ge_l2_minus_slack", med, ">=", summary["l2"]["median"] - a["l2_slack"]))
    checks.append(_check("runtime_max_s", elapsed, "<=", a["runtime_max_s"]))
    return Outcome(["attention", "seed", "test_acc", "train_loss"], rows, metrics, checks,
                   seeds={"runs": list(cfg["seeds"])})


# ---------------------------------------------------------------- classic


_BLOBS = {"kind": "blobs", "centers": [[0.0, 0.0], [4.0, 4.0]], "std": 0.5, "n_per": 100}


def _points(ds, seed):
    """(x, y or None, blob index or None) for blobs, inline points or moons."""
    if ds["kind"] == "blobs":
        centers = np.array(ds["centers"], dtype=float)
        rng = RandomSource(seed).derive("blobs")
        x = np.concatenate([c + rng.normal_matrix(ds["n_per"], centers.shape[1], ds["std"]) for c in centers])
        y = np.repeat(np.arange(len(centers)), ds["n_per"])
        return x, y
    if ds["kind"] == "points":
        y = np.array(ds["y"], dtype=np.int64) if "y" in ds else None
        return np.array(ds["x"], dtype=float), y
    if ds["kind"] == "moons":
        train, _ = _moons(ds, seed)
        return train.x, train.y
    raise ParameterError(f"dataset kind {ds['kind']!r} does not provide points")


def _label_rows(labels):
    return [{"point_index": i, "label": int(v)} for i, v in enumerate(labels)]


def _center_error(centers, x, y):
    """Largest distance from a fitted center to its matched group mean (best matching)."""
    means = np.array([x[y == g].mean(axis=0) for g in np.unique(y)])
    if len(means) != len(centers):
        return math.inf
    best = math.inf
    for perm in itertools.permutations(range(len(means))):
        best = min(best, float(np.linalg.norm(centers - means[list(perm)], axis=1).max()))
    return best


@experiment(
    "fuzzy-c-means",
    "fuzzy c-means clustering of points",
    {"dataset": _BLOBS, "algorithm": {"n_classes": 2, "m": 2.0, "max_iter": 300, "tol": 1e-9}},
    {"center_error_max": 0.2},
)
def _fcm(cfg):
    x, y = _points(cfg["dataset"], cfg["seed"])
    al = cfg["algorithm"]
    res = classic.fuzzy_c_means(x, al["n_classes"], al["m"], al["max_iter"], al["tol"], seed=cfg["seed"])
    metrics = {"result": res.to_dict(), "n_clusters": res.n_clusters}
    checks = []
    if y is not None:
        err = _center_error(res.centers, x, y)
        metrics["center_error"] = err
        checks.append(_check("center_error_max", err, "<=", cfg["assertions"]["center_error_max"]))
    return Outcome(["point_index", "label"], _label_rows(res.labels), metrics, checks,
                   seeds={"data": cfg["seed"], "init": cfg["seed"]})


@experiment(
    "kmeans",
    "Lloyd k-means with k-means++ seeding",
    {"dataset": _BLOBS, "algorithm": {"k": 2, "max_iter": 300, "tol": 0.0}},
    {"cost_nonincreasing": True},
)
def _kmeans(cfg):
    x, _ = _points(cfg["dataset"], cfg["seed"])
    al = cfg["algorithm"]
    res = classic.kmeans(x, al["k"], al["max_iter"], al["tol"], seed=cfg["seed"])
    ok = all(b <= a for a, b in zip(res.history, res.history[1:]))
    metrics = {"result": res.to_dict(), "final_cost": res.history[-1], "cost_nonincreasing": ok}
    return Outcome(["point_index", "label"], _label_rows(res.labels), metrics,
                   [_check("cost_nonincreasing", ok, "==", cfg["assertions"]["cost_nonincreasing"])],
                   seeds={"data": cfg["seed"], "init": cfg["seed"]})


_BRIDGED = [
    [0, 1, 1, 0, 0, 0],
    [1, 0, 1, 0, 0, 0],
    [1, 1, 0, 1, 0, 0],
    [0, 0, 1, 0, 1, 1],
    [0, 0, 0, 1, 0, 1],
    [0, 0, 0, 1, 1, 0],
]


@experiment(
    "mcl",
    "Markov clustering of a weighted graph",
    {"dataset": {"kind": "graph", "weights": _BRIDGED}, "algorithm": {"max_iter": 100, "tol": 1e-12}},
    {"n_clusters": 2, "converged": True},
)
def _mcl(cfg):
    if cfg["dataset"]["kind"] != "graph":
        raise ParameterError("mcl needs a graph dataset with a weights matrix")
    al = cfg["algorithm"]
    res = classic.mcl(np.array(cfg["dataset"]["weights"], dtype=float), al["max_iter"], al["tol"])
    a = cfg["assertions"]
    checks = [_check("converged", res.converged, "==", a["converged"])]
    if "n_clusters" in a:
        checks.append(_check("n_clusters", res.n_clusters, "==", a["n_clusters"]))
    return Outcome(["point_index", "label"], _label_rows(res.labels),
                   {"result": res.to_dict(), "n_clusters": res.n_clusters}, checks)


@experiment(
    "knn",
    "k-nearest-neighbour classification",
    {"dataset": _MOONS, "algorithm": {"k": 5}},
    {"accuracy_min": 0.0, "axioms": True},
)
def _knn(cfg):
    ds = cfg["dataset"]
    k = cfg["algorithm"]["k"]
    if ds["kind"] == "moons":
        train, test = _moons(ds, cfg["seed"])
        x, y, q, expected = train.x, train.y, test.x, test.y
    else:
        x, y = _points(ds, cfg["seed"])
        if y is None:
            raise ParameterError("knn needs labels y")
        q = np.array(ds["query"], dtype=float) if "query" in ds else x
        expected = y if "query" not in ds else None
    pred = np.atleast_1d(classic.knn_predict(x, y, k, q))
    rows = [{"query_index": i, "predicted": int(p), "expected": None if expected is None else int(expected[i])}
            for i, p in enumerate(pred)]
    self_ok = bool(np.array_equal(np.atleast_1d(classic.knn_predict(x, y, 1, x)), y))
    counts = np.bincount(y)
    all_ok = bool((np.atleast_1d(classic.knn_predict(x, y, len(y), x)) == int(np.argmax(counts))).all())
    metrics = {"k": k, "self_label": self_ok, "majority": all_ok}
    a = cfg["assertions"]
    checks = [_check("axioms", self_ok and all_ok, "==", a["axioms"])]
    if expected is not None:
        acc = float((pred == expected).mean())
        metrics["accuracy"] = acc
        checks.append(_check("accuracy_min", acc, ">=", a["accuracy_min"]))
    return Outcome(["query_index", "predicted", "expected"], rows, metrics, checks, seeds={"data": cfg["seed"]})


@experiment(
    "diffusion-map",
    "similarity pipeline (distance init, exp strengthening, two-side then row normalisation) and its spectrum",
    _merge(_MANIFOLD_DEFAULTS, {"manifold": {"n": 400}, "eigen_k": 3,
                                "pipeline": simkit.diffusion_map_spec(0.05).to_dict()}),
    {"row_sum_error_max": 1e-12, "leading_eigenvalue_tol": 1e-8},
)
def _diffusion(cfg):
    cloud, _ = _cloud(cfg)
    spec = simkit.PipelineSpec.from_dict(cfg["pipeline"])
    s = simkit.run_pipeline(spec, cloud.ambient)
    vals, vecs = simkit.top_eigenvectors(s, cfg["eigen_k"], seed=cfg["seed"])
    row_err = float(np.abs(s.sum(axis=1) - 1.0).max())
    k = cfg["eigen_k"]
    rows = [{"point_index": i, **{f"phi_{j}": float(vecs[i, j]) for j in range(k)}} for i in range(cloud.n)]
    metrics = {"eigenvalues": [float(v) for v in vals], "row_sum_error": row_err}
    a = cfg["assertions"]
    checks = [
        _check("row_sum_error_max", row_err, "<=", a["row_sum_error_max"]),
        _check("leading_eigenvalue_tol", abs(float(vals[0]) - 1.0), "<=", a["leading_eigenvalue_tol"]),
    ]
    return Outcome(["point_index"] + [f"phi_{j}" for j in range(k)], rows, metrics, checks,
                   seeds={"sample": cfg["seed"], "eigen_start": cfg["seed"]})


# ---------------------------------------------------------------- datasets


@experiment(
    "moons",
    "generate the two-moons train and test sets",
    {"dataset": _MOONS},
    {"balanced": True},
)
def _moons_exp(cfg):
    train, test = _moons(cfg["dataset"], cfg["seed"])
    rows = []
    for split, pts in (("train", train), ("test", test)):
        rows += [{"split": split, "index": i, **r} for i, r in enumerate(pts.rows())]
    balanced = all(
        int((p.y == 0).sum()) == (len(p.y) + 1) // 2 and int((p.y == 1).sum()) == len(p.y) // 2
        for p in (train, test)
    )
    metrics = {"n_train": len(train.y), "n_test": len(test.y), "balanced": balanced}
    return Outcome(["split", "index", "x", "y", "label"], rows, metrics,
                   [_check("balanced", balanced, "==", cfg["assertions"]["balanced"])],
                   seeds={"root": cfg["seed"], "train": "moons/train", "test": "moons/test"})


@experiment(
    "idx-summary",
    "read IDX image (and optional label) files and summarise them",
    {"dataset": {"kind": "idx"}},
    {"counts_match": True},
)
def _idx(cfg):
    ds = cfg["dataset"]
    if ds.get("kind") != "idx" or "images" not in ds:
        raise ParameterError("idx-summary needs dataset.kind = 'idx' and an images path")
    images = load_idx(ds["images"])
    if not images.is_images:
        raise ParameterError(f"{ds['images']} holds rank-{len(images.dims)} data, not images")
    x = images.as_rows()
    labels = load_idx(ds["labels"]).as_rows() if "labels" in ds else None
    counts_match = labels is None or len(labels) == len(x)
    rows = [{"index": i, "label": None if labels is None else int(labels[i]), "mean_pixel": float(x[i].mean())}
            for i in range(len(x))]
    metrics = {"dims": list(images.dims), "magic": f"0x{images.magic:08X}", "counts_match": counts_match,
               "pixel_min": float(x.min(initial=0.0)), "pixel_max": float(x.max(initial=0.0))}
    notes = {"pixel_scaling": "bytes divided by 255 to lie in [0, 1]"}
    return Outcome(["index", "label", "mean_pixel"], rows, metrics,
                   [_check("counts_match", counts_match, "==", cfg["assertions"]["counts_match"])], notes=notes)


# ---------------------------------------------------------------- runner


def registry_listing() -> str:
    width = max(len(n) for n in REGISTRY)
    return "\n".join(f"{n.ljust(width)}  {e.summary}" for n, e in REGISTRY.items())


def get_experiment(name: str) -> Experiment:
    if name not in REGISTRY:
        raise ParameterError(f"unknown experiment {name!r}; valid names: {', '.join(REGISTRY)}")
    return REGISTRY[name]


def resolve(config: ExperimentConfig, seed: int | None = None, out: str | None = None) -> dict:
    """Merge experiment defaults under the config; CLI seed/out override the file."""
    exp = get_experiment(config.experiment)
    d = config.to_dict()
    if seed is not None:
        d["seed"] = seed
    if out is not None:
        d["out"] = str(out)
    d.setdefault("seed", DEFAULT_SEED)
    d.setdefault("out", str(Path("runs") / exp.name))
    given = d.get("assertions", {})
    unknown = sorted(set(given) - set(exp.assertions))
    if unknown:
        raise ParameterError(f"{exp.name}: unknown assertions {unknown}; known: {sorted(exp.assertions)}")
    resolved = _merge(exp.defaults, d)
    resolved["assertions"] = _merge(exp.assertions, given)
    resolved = {k: v for k, v in resolved.items() if v is not None}
    validate_dict(resolved)
    return resolved


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def run_experiment(config: ExperimentConfig, out=None, seed=None) -> tuple[int, dict]:
    """Run one experiment, write ``report.json`` and ``data.csv``; exit 0 iff every check passes."""
    resolved = resolve(config, seed, out)
    exp = get_experiment(resolved["experiment"])
    t0 = time.perf_counter()
    outcome = exp.run(resolved)
    wall = time.perf_counter() - t0
    passed = all(c["pass"] for c in outcome.checks)
    report = {
        "report_version": REPORT_VERSION,
        "experiment": exp.name,
        "verdict": "pass" if passed else "fail",
        "pass": passed,
        "metrics": outcome.metrics,
        "checks": outcome.checks,
        "seeds": {"seed": resolved["seed"], **outcome.seeds},
        "wall_time_s": wall,
        "backend": kernels.BACKEND,
        "csv_columns": outcome.columns,
        "notes": outcome.notes,
        "config": resolved,
    }
    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "data.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(csv_text(outcome.columns, outcome.rows))
    for name, text in outcome.artifacts.items():
        (out_dir / name).write_text(text, encoding="utf-8")
    report = _jsonable(report)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return (0 if passed else 1), report
