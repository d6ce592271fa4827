"""Sampling densities, point clouds and analytic test fields on S^1 and S^2.

Gradients are returned as ambient tangent vectors, so inner products such as
<grad log p, grad f> are plain row-wise dot products on either manifold.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from attnlab.errors import ParameterError
from attnlab.numeric.rng import RandomSource

MANIFOLDS = {"circle": 1, "sphere": 2}


@dataclass(frozen=True)
class DensitySpec:
    """p = (1 + a cos(theta)) / 2pi on the circle, (1 + a z) / 4pi on the sphere."""

    family: str = "uniform"
    a: float = 0.0

    def __post_init__(self):
        if self.family not in ("uniform", "cosine-tilt"):
            raise ParameterError(f"unknown density family {self.family!r}")
        if not 0.0 <= self.a < 1.0:
            raise ParameterError(f"tilt amplitude must lie in [0, 1), got {self.a}")
        if self.family == "uniform" and self.a != 0.0:
            raise ParameterError("uniform density takes a = 0")

    @property
    def tilt(self) -> float:
        return self.a if self.family == "cosine-tilt" else 0.0

    def normalizer(self, manifold: str) -> float:
        return 2.0 * math.pi if manifold == "circle" else 4.0 * math.pi

    # circle, as functions of the angle
    def p_theta(self, theta):
        return (1.0 + self.tilt * np.cos(theta)) / (2.0 * math.pi)

    def dp_theta(self, theta):
        return -self.tilt * np.sin(theta) / (2.0 * math.pi)

    def value(self, cloud: "PointCloud") -> np.ndarray:
        if cloud.manifold == "circle":
            return self.p_theta(cloud.theta)
        return (1.0 + self.tilt * cloud.ambient[:, 2]) / (4.0 * math.pi)

    def grad_log(self, cloud: "PointCloud") -> np.ndarray:
        """Tangent vector field grad(log p) at each point."""
        x = cloud.ambient
        if cloud.manifold == "circle":
            th = cloud.theta
            dlog = -self.tilt * np.sin(th) / (1.0 + self.tilt * np.cos(th))
            return dlog[:, None] * np.c_[-np.sin(th), np.cos(th)]
        z = x[:, 2]
        grad_z = np.c_[-z * x[:, 0], -z * x[:, 1], 1.0 - z * z]
        return (self.tilt / (1.0 + self.tilt * z))[:, None] * grad_z


@dataclass
class PointCloud:
    ambient: np.ndarray
    intrinsic: np.ndarray | None
    density: np.ndarray
    manifold: str
    density_spec: DensitySpec
    acceptance: float = 1.0

    @property
    def n(self) -> int:
        return self.ambient.shape[0]

    @property
    def manifold_dim(self) -> int:
        return MANIFOLDS[self.manifold]

    @property
    def theta(self) -> np.ndarray:
        if self.manifold != "circle":
            raise ParameterError("theta is only defined on the circle")
        return self.intrinsic[:, 0]


def _circle_inverse_cdf(u, a, tol=1e-12, max_iter=100):
    """Solve (theta + a sin theta) / 2pi = u by safeguarded Newton."""
    target = 2.0 * math.pi * u
    lo = np.zeros_like(u)
    hi = np.full_like(u, 2.0 * math.pi)
    th = target.copy()
    for _ in range(max_iter):
        g = th + a * np.sin(th) - target
        if np.abs(g).max(initial=0.0) <= tol * 2.0 * math.pi:
            break
        lo = np.where(g < 0, th, lo)
        hi = np.where(g > 0, th, hi)
        step = th - g / (1.0 + a * np.cos(th))
        outside = (step <= lo) | (step >= hi)
        th = np.where(outside, 0.5 * (lo + hi), step)
    return th


def circle_cdf(theta, a):
    return (theta + a * np.sin(theta)) / (2.0 * math.pi)


def sample_circle(n: int, spec: DensitySpec, seed: int) -> PointCloud:
    rng = RandomSource(seed).derive("circle")
    u = rng.uniforms(n)
    theta = _circle_inverse_cdf(u, spec.tilt)
    amb = np.c_[np.cos(theta), np.sin(theta)]
    return PointCloud(amb, theta[:, None], spec.p_theta(theta), "circle", spec)


def sample_sphere(n: int, spec: DensitySpec, seed: int, batch: int = 4096) -> PointCloud:
    """Rejection sampling from uniform-sphere proposals, accept w.p. (1 + a z) / (1 + a)."""
    root = RandomSource(seed)
    proposals = root.derive("sphere/proposal")
    accept = root.derive("sphere/accept")
    a = spec.tilt
    kept = []
    count = 0
    proposed = 0
    while count < n:
        g = proposals.normals(3 * batch).reshape(batch, 3)
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
        u = accept.uniforms(batch)
        ok = u * (1.0 + a) < 1.0 + a * pts[:, 2]
        take = np.flatnonzero(ok)[: n - count]
        proposed += batch if count + ok.sum() < n else int(take[-1]) + 1
        kept.append(pts[take])
        count += take.size
    amb = np.concatenate(kept)[:n] if kept else np.zeros((0, 3))
    amb = amb / np.linalg.norm(amb, axis=1, keepdims=True)
    polar = np.arccos(np.clip(amb[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(amb[:, 1], amb[:, 0])
    cloud = PointCloud(amb, np.c_[polar, azimuth], np.empty(n), "sphere", spec,
                       acceptance=n / proposed if proposed else 1.0)
    cloud.density = spec.value(cloud)
    return cloud


def sample(manifold: str, n: int, spec: DensitySpec, seed: int) -> PointCloud:
    if manifold == "circle":
        return sample_circle(n, spec, seed)
    if manifold == "sphere":
        return sample_sphere(n, spec, seed)
    raise ParameterError(f"unknown manifold {manifold!r}")


_CIRCLE_FIELD = re.compile(r"^(cos|sin)(\d*)$")
_SPHERE_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class FieldSpec:
    """Named analytic scalar field.

    Circle: ``cos``, ``sin``, ``cos<k>``, ``sin<k>``, ``const``.
    Sphere: ``x``, ``y``, ``z`` (restricted coordinates), ``const``.
    """

    name: str
    manifold: str = "circle"
    constant: float = 1.0

    def __post_init__(self):
        if self.name == "const":
            return
        if self.manifold == "circle" and _CIRCLE_FIELD.match(self.name):
            return
        if self.manifold == "sphere" and self.name in _SPHERE_AXES:
            return
        raise ParameterError(f"unknown field {self.name!r} on the {self.manifold}")

    def _trig(self):
        kind, k = _CIRCLE_FIELD.match(self.name).groups()
        return kind, int(k) if k else 1

    # circle, as functions of the angle
    def on_theta(self, theta, order=0):
        theta = np.asarray(theta, dtype=np.float64)
        if self.name == "const":
            return np.full_like(theta, self.constant if order == 0 else 0.0)
        kind, k = self._trig()
        # derivatives of cos(k t): -k sin, -k^2 cos; of sin(k t): k cos, -k^2 sin
        if kind == "cos":
            return [np.cos(k * theta), -k * np.sin(k * theta), -k * k * np.cos(k * theta)][order]
        return [np.sin(k * theta), k * np.cos(k * theta), -k * k * np.sin(k * theta)][order]

    def value(self, cloud: PointCloud) -> np.ndarray:
        if cloud.manifold == "circle":
            return self.on_theta(cloud.theta)
        if self.name == "const":
            return np.full(cloud.n, self.constant)
        return cloud.ambient[:, _SPHERE_AXES[self.name]].copy()

    def grad(self, cloud: PointCloud) -> np.ndarray:
        x = cloud.ambient
        if self.name == "const":
            return np.zeros_like(x)
        if cloud.manifold == "circle":
            th = cloud.theta
            return self.on_theta(th, 1)[:, None] * np.c_[-np.sin(th), np.cos(th)]
        axis = _SPHERE_AXES[self.name]
        g = -x[:, axis][:, None] * x
        g[:, axis] += 1.0
        return g

    def laplacian(self, cloud: PointCloud) -> np.ndarray:
        if self.name == "const":
            return np.zeros(cloud.n)
        if cloud.manifold == "circle":
            return self.on_theta(cloud.theta, 2)
        # coordinate functions are degree-1 spherical harmonics
        return -2.0 * cloud.ambient[:, _SPHERE_AXES[self.name]]


def attention_operator(field: FieldSpec, cloud: PointCloud) -> np.ndarray:
    """Delta f + 2 <grad p / p, grad f> evaluated at the cloud points."""
    drift = (cloud.density_spec.grad_log(cloud) * field.grad(cloud)).sum(axis=1)
    return field.laplacian(cloud) + 2.0 * drift
