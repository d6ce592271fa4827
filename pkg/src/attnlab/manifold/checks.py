"""Heat-kernel and attention-step estimators compared against analytic operators.

All large-N estimates stream through ``attnlab.kernels.softmax_smooth``; the
dense ``GraphLaplacian`` is for small clouds and cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from attnlab import kernels
from attnlab.errors import DegenerateInputError, ParameterError, PreconditionError
from attnlab.manifold.geometry import FieldSpec, PointCloud, attention_operator
from attnlab.numeric.linalg import pairwise_sqdist


@dataclass
class GraphLaplacian:
    W: np.ndarray
    degrees: np.ndarray
    L: np.ndarray
    eps: float


def build_graph_laplacian(cloud, eps: float) -> GraphLaplacian:
    """W_ij = exp(-|x_i - x_j|^2 / 2eps), L = D^-1 W - I (dense)."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    x = cloud.ambient if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    w = np.exp(-pairwise_sqdist(x) / (2.0 * eps))
    deg = w.sum(axis=1)
    lap = w / deg[:, None]
    lap[np.diag_indices_from(lap)] -= 1.0
    # exact zero row sums: put the rounding residue on the diagonal
    lap[np.diag_indices_from(lap)] -= lap.sum(axis=1)
    return GraphLaplacian(w, deg, lap, eps)


@dataclass
class RegressionReport:
    """Least-squares fit estimate ~ slope * target + intercept."""

    slope: float | None
    intercept: float | None
    r2: float | None
    n: int
    estimate: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    max_abs: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.slope is None

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "n": self.n,
            "max_abs_estimate": self.max_abs,
        }

    def rows(self):
        for i, (e, t) in enumerate(zip(self.estimate, self.target)):
            yield {"point_index": i, "estimate": float(e), "target": float(t)}


def regress(estimate, target) -> RegressionReport:
    e = np.asarray(estimate, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if np.ptp(t) == 0.0:
        return RegressionReport(None, None, None, e.size, e, t, max_abs=float(np.abs(e).max(initial=0.0)))
    tc = t - t.mean()
    ec = e - e.mean()
    slope = float(tc @ ec / (tc @ tc))
    intercept = float(e.mean() - slope * t.mean())
    resid = ec - slope * tc
    r2 = float(1.0 - (resid @ resid) / (ec @ ec)) if ec @ ec > 0 else 0.0
    return RegressionReport(slope, intercept, r2, e.size, e, t)


def heat_smooth(cloud: PointCloud, values, eps: float, backend=None) -> np.ndarray:
    """(D^-1 W f)_i for the kernel exp(-|x_i - x_j|^2 / 2eps)."""
    v = np.asarray(values, dtype=np.float64)
    return kernels.softmax_smooth(cloud.ambient, cloud.ambient, v.reshape(cloud.n, -1), 2.0 * eps,
                                  "sqdist", backend=backend).reshape(v.shape)


def laplacian_convergence_check(cloud: PointCloud, eps: float, field: FieldSpec,
                                backend=None) -> RegressionReport:
    """Regress (1/eps)(L f)_i on (1/2) Delta f(x_i) for a uniformly sampled cloud."""
    if cloud.density_spec.tilt != 0.0:
        raise PreconditionError("the plain Laplacian limit needs a uniform sampling density")
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    f = field.value(cloud)
    est = (heat_smooth(cloud, f, eps, backend) - f) / eps
    return regress(est, 0.5 * field.laplacian(cloud))


def drift_target(cloud: PointCloud, field: FieldSpec) -> np.ndarray:
    return 0.5 * attention_operator(field, cloud)


def drift_deviation_check(cloud: PointCloud, eps: float, field: FieldSpec,
                          backend=None) -> RegressionReport:
    """Regress (1/eps)(L f)_i on (1/2)(Delta f + 2 <grad p / p, grad f>)."""
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    f = field.value(cloud)
    est = (heat_smooth(cloud, f, eps, backend) - f) / eps
    return regress(est, drift_target(cloud, field))


def attention_step(h, metric=None, eps: float = 0.5, coords=None, backend=None) -> np.ndarray:
    """H_new = row_softmax(-F / 2eps) H with F_ij = f(c_i, c_j).

    ``coords`` are the points the pseudo-metric is evaluated on (default:
    the rows of H). ``metric=None`` means squared Euclidean distance;
    otherwise any pseudo-metric kind from ``attnlab.attention``.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    h = np.asarray(h, dtype=np.float64)
    vals = h.reshape(h.shape[0], -1)
    c = vals if coords is None else np.asarray(coords, dtype=np.float64)
    if metric is None:
        q = k = c
        mode = "sqdist"
    else:
        q, k, mode = metric.kernel_args(c)
    out = kernels.softmax_smooth(q, k, vals, 2.0 * eps, mode, backend=backend)
    return out.reshape(h.shape)


def attention_limit_check(cloud: PointCloud, eps: float, field: FieldSpec, metric=None,
                          backend=None) -> RegressionReport:
    """Regress (2/eps)(H_new - H) on Delta H + 2 <grad p / p, grad H>.

    The pseudo-metric acts on ambient coordinates; H is the field.
    """
    h = field.value(cloud)
    new = attention_step(h, metric, eps, coords=cloud.ambient, backend=backend)
    return regress(2.0 * (new - h) / eps, attention_operator(field, cloud))


@dataclass
class ZerothOrderReport:
    eps: list[float]
    max_error: list[float]
    argmin: np.ndarray = field(repr=False)

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.max_error, self.max_error[1:]))

    def rows(self):
        for e, err in zip(self.eps, self.max_error):
            yield {"eps": e, "max_error": err}


def zeroth_order_check(cloud: PointCloud, metric, field: FieldSpec, eps_list,
                       tie_tol: float = 1e-15, backend=None) -> ZerothOrderReport:
    """max_x |H_new(x) - H(y'(x))| per eps, with y'(x) the sampled argmin of f(x, .)."""
    h = field.value(cloud)
    if metric is None:
        q = k = cloud.ambient
        mode = "sqdist"
    else:
        q, k, mode = metric.kernel_args(cloud.ambient)
    idx, gap = kernels.pseudo_argmin(q, k, mode, backend=backend)
    tied = np.flatnonzero(gap <= tie_tol)
    if tied.size:
        raise DegenerateInputError(
            f"argmin not unique for {tied.size} points, e.g. indices {tied[:10].tolist()}",
            index=tied.tolist(),
        )
    errors = []
    for eps in eps_list:
        new = kernels.softmax_smooth(q, k, h[:, None], 2.0 * eps, mode, backend=backend)[:, 0]
        errors.append(float(np.abs(new - h[idx]).max()))
    return ZerothOrderReport([float(e) for e in eps_list], errors, idx)


def feature_variance(h) -> float:
    h = np.asarray(h, dtype=np.float64).reshape(len(h), -1)
    return float(((h - h.mean(axis=0)) ** 2).mean())


@dataclass
class DecayTrajectory:
    """Variance per step. ``floor`` is the round-off level of the features:
    once all rows agree to machine precision the variance is noise below it,
    so comparisons treat anything under ``floor`` as equal to ``floor``."""

    variance: list[float]
    within: list[float] | None = None
    between: list[float] | None = None
    floor: float = 0.0

    def _clip(self, series):
        return [max(v, self.floor) for v in series]

    def nonincreasing(self, series=None) -> bool:
        s = self._clip(self.variance if series is None else series)
        return all(b <= a for a, b in zip(s, s[1:]))

    def ratio(self, series=None) -> float:
        s = self.variance if series is None else series
        return s[-1] / s[0] if s[0] > 0 else 0.0

    def rate(self, series) -> float:
        """Mean per-step decay -log(v_T / v_0) / T, with v clipped at ``floor``."""
        s = self._clip(series)
        if s[0] == 0.0:
            return 0.0
        return float(-np.log(s[-1] / s[0]) / (len(s) - 1))

    def rows(self):
        for t, v in enumerate(self.variance):
            row = {"step": t, "variance": v}
            if self.within is not None:
                row["within"] = self.within[t]
                row["between"] = self.between[t]
            yield row


def clustering_decay(h0, metric=None, eps: float = 0.5, steps: int = 20, groups=None,
                     backend=None) -> DecayTrajectory:
    """Iterate attention_step on its own output and track the feature variance.

    With ``groups`` (a label per row) the within-group variance (mean squared
    deviation from group means) and between-group variance (of the group
    means, weighted by size) are tracked too.
    """
    if steps < 1:
        raise ParameterError(f"steps must be at least 1, got {steps}")
    h = np.asarray(h0, dtype=np.float64).reshape(len(h0), -1).copy()
    floor = (4.0 * np.finfo(np.float64).eps * float(np.abs(h).max(initial=0.0))) ** 2
    labels = None if groups is None else np.asarray(groups)

    def split(x):
        means = np.zeros_like(x)
        for g in np.unique(labels):
            means[labels == g] = x[labels == g].mean(axis=0)
        within = float(((x - means) ** 2).mean())
        between = float(((means - x.mean(axis=0)) ** 2).mean())
        return within, between

    var = [feature_variance(h)]
    within, between = ([], []) if labels is not None else (None, None)
    if labels is not None:
        w, b = split(h)
        within.append(w)
        between.append(b)
    for _ in range(steps):
        h = attention_step(h, metric, eps, backend=backend)
        var.append(feature_variance(h))
        if labels is not None:
            w, b = split(h)
            within.append(w)
            between.append(b)
    return DecayTrajectory(var, within, between, floor)
