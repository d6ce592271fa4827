"""Grid-based references on the periodic circle, the conformal rescaling
identity, and the closed-form argmin of a bilinear pseudo-metric on spheres."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from attnlab.errors import DegenerateInputError, ParameterError, PreconditionError
from attnlab.manifold.geometry import DensitySpec, FieldSpec


def circle_grid(grid_size: int) -> np.ndarray:
    return 2.0 * math.pi * np.arange(grid_size) / grid_size


def pde_euler_reference(grid_size: int, density: DensitySpec, field: FieldSpec, dt: float,
                        steps: int):
    """Explicit Euler for dH/dt = H'' + 2 (p'/p) H' on a periodic grid.

    Central differences in space. Returns (theta, H) after ``steps`` steps.
    """
    h = 2.0 * math.pi / grid_size
    if not 0 < dt <= 0.4 * h * h:
        raise PreconditionError(f"dt={dt} violates the stability bound 0.4*h^2={0.4 * h * h:.3e}")
    if steps < 0:
        raise ParameterError(f"steps must be nonnegative, got {steps}")
    theta = circle_grid(grid_size)
    drift = 2.0 * density.dp_theta(theta) / density.p_theta(theta)
    u = field.on_theta(theta).astype(np.float64)
    for _ in range(steps):
        up = np.roll(u, -1)
        um = np.roll(u, 1)
        u = u + dt * ((up - 2.0 * u + um) / (h * h) + drift * (up - um) / (2.0 * h))
    return theta, u


def conformal_exponent(n: int) -> float:
    if n == 2:
        raise PreconditionError("the conformal heat form needs manifold dimension n != 2")
    return 4.0 / (n - 2)


def conformal_identity_check(density: DensitySpec, field: FieldSpec, n: int = 1,
                             grid_size: int = 4096, method: str = "analytic") -> float:
    """max |(Delta H + 2 <grad p/p, grad H>) - p^k Delta_gt H| on the circle, k = 4/(n-2).

    gt = p^k g is the conformally rescaled metric. The Laplace-Beltrami
    operator of gt is taken from its flux form
    (1/sqrt|gt|) d/dtheta (sqrt|gt| gt^-1 dH/dtheta), either with analytic
    derivatives or by second-order central differences on the grid.
    """
    k = conformal_exponent(n)
    if n != 1:
        raise ParameterError("only the circle (n = 1) is implemented")
    theta = circle_grid(grid_size)
    p = density.p_theta(theta)
    dp = density.dp_theta(theta)
    d1 = field.on_theta(theta, 1)
    d2 = field.on_theta(theta, 2)
    lhs = d2 + 2.0 * (dp / p) * d1
    if method == "analytic":
        # sqrt|gt| gt^-1 = p^(-k/2); 1/sqrt|gt| = p^(-k/2)
        flux_deriv = p ** (-k / 2) * d2 - (k / 2) * p ** (-k / 2 - 1) * dp * d1
        lb = p ** (-k / 2) * flux_deriv
    elif method == "fd":
        h = 2.0 * math.pi / grid_size
        half = theta + 0.5 * h
        coef = density.p_theta(half) ** (-k / 2)
        hv = field.on_theta(theta)
        flux = coef * (np.roll(hv, -1) - hv) / h
        lb = p ** (-k / 2) * (flux - np.roll(flux, 1)) / h
    else:
        raise ParameterError(f"unknown method {method!r}")
    rhs = p ** k * lb
    return float(np.abs(lhs - rhs).max())


@dataclass
class ArgminResult:
    closed_form: np.ndarray
    brute_force: np.ndarray
    sign: int
    angle_error: float
    tolerance: float
    resolution: int

    @property
    def agree(self) -> bool:
        return self.angle_error <= self.tolerance


def _angle(u, v):
    return float(np.arccos(np.clip(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)), -1.0, 1.0)))


def sphere_directions(n: int, resolution: int) -> tuple[np.ndarray, float]:
    """Quasi-uniform unit vectors and the spacing between neighbours."""
    if n == 2:
        t = 2.0 * math.pi * np.arange(resolution) / resolution
        return np.c_[np.cos(t), np.sin(t)], 2.0 * math.pi / resolution
    if n == 3:
        i = np.arange(resolution) + 0.5
        z = 1.0 - 2.0 * i / resolution
        r = np.sqrt(1.0 - z * z)
        phi = math.pi * (3.0 - math.sqrt(5.0)) * i
        return np.c_[r * np.cos(phi), r * np.sin(phi), z], math.sqrt(4.0 * math.pi / resolution)
    raise ParameterError("grid search is implemented for n = 2 and 3")


def argmin_pseudo_metric(x, a, rotation, resolution: int = 10_000) -> ArgminResult:
    """Stationary point of y -> sum_i a_i x'_i y'_i on the unit sphere vs grid search.

    Primed coordinates are ``rotation @ v``. The Lagrange stationary point
    y' = a*x' / |a*x'| is returned next to the grid minimiser; ``sign`` is the
    global sign (+1 or -1) that best aligns them.
    """
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    p = np.asarray(rotation, dtype=np.float64)
    n = x.size
    if p.shape != (n, n) or a.shape != (n,):
        raise ParameterError("x, a and the rotation must have matching dimensions")
    if not np.allclose(p @ p.T, np.eye(n), atol=1e-10) or np.linalg.det(p) < 0:
        raise ParameterError("rotation must be special orthogonal")
    xp = p @ x
    ax = a * xp
    norm = np.linalg.norm(ax)
    if norm == 0.0:
        raise DegenerateInputError("a_i x'_i vanishes for every i; the minimiser is not unique")
    closed = p.T @ (ax / norm)
    dirs, spacing = sphere_directions(n, resolution)
    values = (dirs @ p.T) @ ax  # sum_i a_i x'_i (P y)_i for each grid y
    brute = dirs[int(np.argmin(values))]
    err_pos = _angle(brute, closed)
    err_neg = _angle(brute, -closed)
    sign = 1 if err_pos <= err_neg else -1
    return ArgminResult(closed, brute, sign, min(err_pos, err_neg), 2.0 * spacing, resolution)
