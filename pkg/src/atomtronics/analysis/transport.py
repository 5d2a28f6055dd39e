"""Reservoir number imbalance, two-regime transport fits and the RCL circuit model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..core import AtomtronicsError, ConvergenceError, DensityMap, Grid2D, InvalidInputError


class UndefinedImbalanceError(AtomtronicsError):
    """Both reservoirs are empty, so the imbalance has no value."""


def region_mask(spec: dict, grid: Grid2D) -> np.ndarray:
    """Boolean mask for a region description.

    Supported kinds: ``halfplane`` (``side`` left/right/below/above of
    ``x0``/``y0``), ``disk`` (``center``, ``radius``), ``rect`` (``center``,
    ``size``), ``annulus`` (``center``, ``r_inner``, ``r_outer``).  An
    optional ``within`` entry intersects with another region and ``invert``
    takes the complement.
    """
    x, y = grid.meshgrid()
    kind = spec.get("kind")
    if kind == "halfplane":
        side = spec.get("side", "left")
        if side in ("left", "right"):
            x0 = spec.get("x0", 0.0)
            mask = x < x0 if side == "left" else x > x0
        elif side in ("below", "above"):
            y0 = spec.get("y0", 0.0)
            mask = y < y0 if side == "below" else y > y0
        else:
            raise InvalidInputError(f"unknown half-plane side {side!r}")
    elif kind == "disk":
        cx, cy = spec.get("center", (0.0, 0.0))
        mask = (x - cx) ** 2 + (y - cy) ** 2 <= spec["radius"] ** 2
    elif kind == "rect":
        cx, cy = spec.get("center", (0.0, 0.0))
        sx, sy = spec["size"]
        mask = (np.abs(x - cx) <= sx / 2) & (np.abs(y - cy) <= sy / 2)
    elif kind == "annulus":
        cx, cy = spec.get("center", (0.0, 0.0))
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        mask = (r2 >= spec["r_inner"] ** 2) & (r2 <= spec["r_outer"] ** 2)
    else:
        raise InvalidInputError(f"unknown region kind {kind!r}")
    if "within" in spec:
        mask = mask & region_mask(spec["within"], grid)
    if spec.get("invert"):
        mask = ~mask
    return mask


def _as_mask(mask, grid):
    if isinstance(mask, dict):
        return region_mask(mask, grid)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise InvalidInputError("mask shape does not match the density grid")
    return mask


def reservoir_counts(dens: DensityMap, mask_initial, mask_final):
    mi = _as_mask(mask_initial, dens.grid)
    mf = _as_mask(mask_final, dens.grid)
    if np.any(mi & mf):
        raise InvalidInputError("reservoir masks overlap")
    return float(dens.values[mi].sum()), float(dens.values[mf].sum())


def imbalance(dens: DensityMap, mask_initial, mask_final) -> float:
    """``(N_i - N_f) / (N_i + N_f)`` with N the mask-integrated density."""
    n_i, n_f = reservoir_counts(dens, mask_initial, mask_final)
    total = n_i + n_f
    if total == 0:
        raise UndefinedImbalanceError("both reservoirs are empty")
    return (n_i - n_f) / total


@dataclass(frozen=True)
class ImbalanceTrace:
    t: np.ndarray
    dn: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        dn = np.asarray(self.dn, dtype=float)
        if t.shape != dn.shape or t.ndim != 1:
            raise InvalidInputError("times and imbalance values must be 1D arrays of equal length")
        if np.any(np.abs(dn) > 1 + 1e-12):
            raise InvalidInputError("imbalance values must lie in [-1, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "dn", dn)


@dataclass(frozen=True)
class RclModel:
    """Lumped circuit: inductance L, capacitance C, resistance R (any consistent units)."""

    L: float
    C: float
    R: float = 0.0
    dn0: float = 1.0

    def __post_init__(self):
        if not (self.L > 0 and self.C > 0):
            raise InvalidInputError("L and C must be positive")
        if self.R < 0:
            raise InvalidInputError("R must be non-negative")
        if not -1 <= self.dn0 <= 1:
            raise InvalidInputError("initial imbalance must lie in [-1, 1]")

    @property
    def omega(self):
        return 1.0 / math.sqrt(self.L * self.C)

    @property
    def gamma(self):
        return self.R / (2 * self.L)


def rcl_trace(model: RclModel, t_samples) -> ImbalanceTrace:
    """Closed-form solution of ``x'' + (R/L) x' + x/(LC) = 0`` with ``x'(0) = 0``."""
    t = np.asarray(t_samples, dtype=float)
    w0, g, a = model.omega, model.gamma, model.dn0
    if math.isclose(g, w0, rel_tol=1e-12):
        x = a * np.exp(-g * t) * (1 + g * t)
        regime = "critical"
    elif g < w0:
        wd = math.sqrt(w0 * w0 - g * g)
        x = a * np.exp(-g * t) * (np.cos(wd * t) + (g / wd) * np.sin(wd * t))
        regime = "underdamped"
    else:
        root = math.sqrt(g * g - w0 * w0)
        r1, r2 = -g + root, -g - root
        x = a * (r2 * np.exp(r1 * t) - r1 * np.exp(r2 * t)) / (r2 - r1)
        regime = "overdamped"
    return ImbalanceTrace(t, np.clip(x, -1.0, 1.0), {"model": "rcl", "regime": regime})


@dataclass(frozen=True)
class TwoRegimeFit:
    t_break: float
    ballistic_slope: float
    intercept: float
    tau: float
    omega: float
    phase: float
    amplitude: float
    offset: float
    rss: float
    r_squared: float
    flags: tuple = ()

    @property
    def omega_natural(self):
        """Undamped frequency ``sqrt(omega^2 + 1/tau^2)`` of the equivalent circuit."""
        if not math.isfinite(self.tau):
            return self.omega
        return math.sqrt(self.omega**2 + 1.0 / self.tau**2)

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        lin = self.intercept + self.ballistic_slope * t
        if not math.isfinite(self.tau):
            return lin
        s = t - self.t_break
        tail = self.amplitude * np.exp(-s / self.tau) * np.cos(self.omega * s + self.phase) + self.offset
        return np.where(t < self.t_break, lin, tail)

    def to_dict(self):
        def num(v):
            return v if math.isfinite(v) else None
        return {"t_break_s": self.t_break, "ballistic_slope_per_s": self.ballistic_slope,
                "intercept": self.intercept, "tau_s": num(self.tau), "omega_rad_s": self.omega,
                "omega_natural_rad_s": num(self.omega_natural), "phase_rad": self.phase,
                "amplitude": self.amplitude, "offset": self.offset, "rss": self.rss,
                "r_squared": self.r_squared, "flags": list(self.flags)}


def _tail_frequency_guesses(t, y):
    """Candidate angular frequencies from the periodogram of the detrended tail."""
    if len(t) < 4:
        return [1.0 / max(t[-1] - t[0], 1e-12)]
    dt = np.median(np.diff(t))
    resid = y - np.polyval(np.polyfit(t - t[0], y, 1), t - t[0])
    n = 8 * len(resid)
    spec = np.abs(np.fft.rfft(resid, n))
    freqs = np.fft.rfftfreq(n, dt) * 2 * np.pi
    spec[0] = 0
    best = freqs[int(np.argmax(spec))]
    span = t[-1] - t[0]
    base = max(best, np.pi / span)
    return [base, 0.5 * base, 2 * base]


def _fit_at_break(t, y, i_break, omega_guesses):
    tb = t[i_break]
    head_t, head_y = t[:i_break], y[:i_break]
    slope, intercept = np.polyfit(head_t, head_y, 1)
    tail_t, tail_y = t[i_break:], y[i_break:]
    s_tail = tail_t - tb
    span = max(s_tail[-1], 1e-12)
    c0 = float(np.mean(tail_y[len(tail_y) // 2:]))
    y_tb = intercept + slope * tb

    def residuals(theta):
        a, s, amp, log_tau, omega, phi = theta
        offset = a + s * tb - amp * math.cos(phi)
        lin = a + s * head_t
        tail = amp * np.exp(-s_tail / math.exp(log_tau)) * np.cos(omega * s_tail + phi) + offset
        return np.concatenate([lin - head_y, tail - tail_y])

    best = None
    for omega0 in omega_guesses:
        tau0 = span / 2
        env = np.exp(-s_tail / tau0)
        basis = np.column_stack([env * np.cos(omega0 * s_tail), -env * np.sin(omega0 * s_tail)])
        (ac, as_), *_ = np.linalg.lstsq(basis, tail_y - c0, rcond=None)
        amp0 = math.hypot(ac, as_) or abs(y_tb - c0) or 1e-3
        phi0 = math.atan2(as_, ac)
        theta0 = [intercept, slope, amp0, math.log(tau0), omega0, phi0]
        try:
            res = least_squares(residuals, theta0, method="lm", max_nfev=4000)
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(res.fun)):
            continue
        rss = float(res.fun @ res.fun)
        if best is None or rss < best[0]:
            best = (rss, res)
    return best


def fit_two_regime(trace: ImbalanceTrace, window=(0.1, 0.7)) -> TwoRegimeFit:
    """Linear ballistic segment followed by a damped oscillation.

    The breakpoint is scanned over every sample between ``window`` fractions
    of the time span; for each candidate the full continuous model is
    refined by Levenberg-Marquardt and the lowest residual wins.
    """
    t, y = trace.t, trace.dn
    if len(t) < 20:
        raise InvalidInputError(f"two-regime fit needs >= 20 samples, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise InvalidInputError("trace times must be strictly increasing")
    span = t[-1] - t[0]
    lo, hi = t[0] + window[0] * span, t[0] + window[1] * span
    candidates = [i for i in range(len(t)) if lo <= t[i] <= hi and i >= 2 and len(t) - i >= 6]
    if not candidates:
        raise InvalidInputError("trace does not span both regimes")
    omega_guesses = _tail_frequency_guesses(t[candidates[0]:], y[candidates[0]:])

    best = None
    for i in candidates:
        fit = _fit_at_break(t, y, i, omega_guesses)
        if fit is not None and (best is None or fit[0] < best[0]):
            best = (fit[0], fit[1], i)
    if best is None:
        raise ConvergenceError("no breakpoint candidate produced a converged fit")
    rss, res, i = best
    a, s, amp, log_tau, omega, phi = res.x
    if amp < 0:
        amp, phi = -amp, phi + math.pi
    if omega < 0:
        omega, phi = -omega, -phi
    phi = math.atan2(math.sin(phi), math.cos(phi))
    tb = t[i]
    offset = a + s * tb - amp * math.cos(phi)
    tss = float(np.sum((y - y.mean()) ** 2))

    lin_coef = np.polyfit(t, y, 1)
    lin_rss = float(np.sum((np.polyval(lin_coef, t) - y) ** 2))
    scale = max(tss, 1e-300)
    if lin_rss <= rss * (1 + 1e-6) + 1e-12 * scale:
        return TwoRegimeFit(float(t[-1]), float(lin_coef[0]), float(lin_coef[1]), math.inf, 0.0,
                            0.0, 0.0, float(np.polyval(lin_coef, t[-1])), lin_rss,
                            1 - lin_rss / scale if tss > 0 else 1.0, ("single_regime",))
    return TwoRegimeFit(float(tb), float(s), float(a), math.exp(log_tau), float(omega), float(phi),
                        float(amp), float(offset), rss, 1 - rss / scale if tss > 0 else 1.0,
                        () if res.success else ("not_converged",))
