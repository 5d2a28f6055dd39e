"""Cloud-size fits and time-of-flight thermometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..core import K_B, M_RB87, ConvergenceError, DensityMap, InvalidInputError


class FitError(InvalidInputError):
    """Data cannot support the requested fit."""


@dataclass(frozen=True)
class RadiusFit:
    radius: float  # rms width per axis, m
    radius_err: float
    center: tuple
    amplitude: float
    background: float
    residual_norm: float


def _moments(x, y, w):
    total = w.sum()
    cx = float((w * x).sum() / total)
    cy = float((w * y).sum() / total)
    var = float((w * ((x - cx) ** 2 + (y - cy) ** 2)).sum() / total) / 2
    return cx, cy, var


def fit_gaussian_radius(dens: DensityMap, background=True) -> RadiusFit:
    """Least-squares isotropic gaussian ``A exp(-r^2 / 2R^2) + B``.

    ``R`` is the rms width along each axis, so that a ballistic cloud obeys
    ``R^2(t) = R^2(0) + (k_B T / m) t^2``.
    """
    data = np.asarray(dens.values, dtype=float)
    n_params = 5 if background else 4
    if data.size < 10 * n_params:
        raise FitError(f"{data.size} cells cannot constrain {n_params} parameters")
    if not data.sum() > 0:
        raise FitError("density has no positive mass")
    if np.count_nonzero(data > 0) < 5:
        raise FitError("density is concentrated on fewer than five cells")

    grid = dens.grid
    p = grid.pitch
    # work in cell units for conditioning
    xs = (grid.x - grid.origin[0]) / p
    ys = (grid.y - grid.origin[1]) / p
    X, Y = np.meshgrid(xs, ys)
    scale = data.max()
    z = data / scale
    w = np.clip(z, 0, None)
    cx, cy, var = _moments(X, Y, w)
    if var <= 0:
        raise FitError("density has zero spread")

    def model(theta):
        a, x0, y0, r = theta[:4]
        g = a * np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / (2 * r * r))
        return g + theta[4] if background else g

    theta0 = [1.0, cx, cy, math.sqrt(var)] + ([0.0] if background else [])
    res = least_squares(lambda th: (model(th) - z).ravel(), theta0, method="lm",
                        x_scale="jac", max_nfev=2000)
    if not res.success:
        raise ConvergenceError(f"gaussian fit did not converge: {res.message}",
                               residual=float(np.linalg.norm(res.fun)))
    theta = res.x
    dof = max(z.size - len(theta), 1)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
        r_err = math.sqrt(max(cov[3, 3], 0.0)) * p
    except np.linalg.LinAlgError:
        r_err = float("nan")
    return RadiusFit(
        radius=abs(theta[3]) * p,
        radius_err=r_err,
        center=(grid.origin[0] + theta[1] * p, grid.origin[1] + theta[2] * p),
        amplitude=theta[0] * scale,
        background=(theta[4] * scale) if background else 0.0,
        residual_norm=float(np.linalg.norm(res.fun) * scale),
    )


@dataclass(frozen=True)
class RadiusSeries:
    t: np.ndarray
    radius: np.ndarray
    radius_err: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        r = np.asarray(self.radius, dtype=float)
        if t.shape != r.shape or t.ndim != 1:
            raise InvalidInputError("times and radii must be 1D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        if np.any(r <= 0):
            raise InvalidInputError("radii must be positive")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "radius", r)
        if self.radius_err is not None:
            object.__setattr__(self, "radius_err", np.asarray(self.radius_err, dtype=float))


@dataclass(frozen=True)
class TemperatureFit:
    temperature: float
    temperature_err: float
    slope: float  # m^2/s^2
    r0_squared: float
    flags: tuple = field(default_factory=tuple)

    def __iter__(self):
        return iter((self.temperature, self.temperature_err))

    def to_dict(self):
        return {"temperature_K": self.temperature, "temperature_err_K": self.temperature_err,
                "slope_m2_per_s2": self.slope, "r0_squared_m2": self.r0_squared,
                "flags": list(self.flags)}


def fit_temperature(series: RadiusSeries, mass=M_RB87) -> TemperatureFit:
    """Linear fit of ``R^2`` against ``t^2``; temperature from the slope.

    Radii with uncertainties are weighted by ``1 / (2 R dR)``.
    """
    if len(series.t) < 3:
        raise InvalidInputError("need at least three radius samples")
    t2 = series.t**2
    r2 = series.radius**2
    A = np.column_stack([np.ones_like(t2), t2])
    if series.radius_err is not None and np.all(series.radius_err > 0):
        w = 1.0 / (2 * series.radius * series.radius_err)
    else:
        w = np.ones_like(t2)
    Aw = A * w[:, None]
    bw = r2 * w
    coef, *_ = np.linalg.lstsq(Aw, bw, rcond=None)
    resid = bw - Aw @ coef
    dof = max(len(t2) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = np.linalg.inv(Aw.T @ Aw) * s2
    slope = float(coef[1])
    flags = ("negative_slope",) if slope < 0 else ()
    return TemperatureFit(slope * mass / K_B, math.sqrt(max(cov[1, 1], 0.0)) * mass / K_B,
                          slope, float(coef[0]), flags)
