"""Fringe phase extraction and long-term drift tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import InvalidInputError


@dataclass(frozen=True)
class FringeFit:
    phase: float
    amplitude: float
    background: float
    low_contrast: bool

    def __iter__(self):
        return iter((self.phase, self.amplitude, self.background))


def wrap_phase(phi):
    """Map to (-pi, pi]."""
    w = math.atan2(math.sin(phi), math.cos(phi))
    return math.pi if w <= -math.pi else w


def fringe_phase(image, d, z) -> FringeFit:
    """Fit ``B + A cos(2 pi z / d + phi)`` to the row-averaged profile.

    ``z`` holds the coordinate of each image row.
    """
    image = np.asarray(image, dtype=float)
    profile = image.mean(axis=1) if image.ndim == 2 else image
    z = np.asarray(z, dtype=float)
    if z.shape != profile.shape:
        raise InvalidInputError("need one z coordinate per image row")
    if (z.max() - z.min()) < 3 * d * (1 - 1e-9) - (z[1] - z[0]):
        raise InvalidInputError("image must span at least three fringe periods")
    k = 2 * np.pi / d
    basis = np.column_stack([np.ones_like(z), np.cos(k * z), np.sin(k * z)])
    coef, *_ = np.linalg.lstsq(basis, profile, rcond=None)
    b, ca, sa = coef
    amplitude = math.hypot(ca, sa)
    phase = wrap_phase(math.atan2(-sa, ca))
    resid = profile - basis @ coef
    sigma_amp = math.sqrt(float(resid @ resid) / max(len(z) - 3, 1)) * math.sqrt(2.0 / len(z))
    low = amplitude <= 3 * sigma_amp or amplitude <= 1e-12 * max(abs(b), 1e-300)
    return FringeFit(phase, amplitude, float(b), bool(low))


@dataclass(frozen=True)
class DriftSeries:
    t: np.ndarray
    phase: np.ndarray  # unwrapped, rad
    ambiguous: np.ndarray  # bool per step i -> i+1
    low_contrast: np.ndarray

    @property
    def total_drift(self):
        return float(self.phase[-1] - self.phase[0])

    @property
    def rms(self):
        """Rms scatter about a straight-line drift."""
        if len(self.t) < 3:
            return 0.0
        coef = np.polyfit(self.t - self.t[0], self.phase, 1)
        resid = self.phase - np.polyval(coef, self.t - self.t[0])
        return float(np.sqrt(np.mean(resid**2)))

    def to_dict(self):
        return {"total_drift_rad": self.total_drift, "total_drift_deg": math.degrees(self.total_drift),
                "rms_rad": self.rms, "ambiguous_steps": int(self.ambiguous.sum()),
                "low_contrast_images": int(self.low_contrast.sum())}


def unwrap(phases, threshold=0.9 * np.pi):
    """Nearest-branch unwrapping; steps larger than ``threshold`` are flagged."""
    phases = np.asarray(phases, dtype=float)
    out = np.empty_like(phases)
    flags = np.zeros(max(len(phases) - 1, 0), dtype=bool)
    if len(phases) == 0:
        return out, flags
    out[0] = phases[0]
    for i in range(1, len(phases)):
        step = wrap_phase(phases[i] - phases[i - 1])
        flags[i - 1] = abs(step) >= threshold
        out[i] = out[i - 1] + step
    return out, flags


def phase_drift_series(images, d, z, threshold=0.9 * np.pi) -> DriftSeries:
    """Fringe phase of every ``(t, image)`` pair, unwrapped in time order."""
    images = sorted(images, key=lambda item: item[0])
    t = np.array([item[0] for item in images], dtype=float)
    fits = [fringe_phase(img, d, z) for _, img in images]
    phase, flags = unwrap([f.phase for f in fits], threshold)
    return DriftSeries(t, phase, flags, np.array([f.low_contrast for f in fits]))
