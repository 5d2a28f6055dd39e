"""SLM bitmaps, their blurred image at the atom plane, and MTF/PSF measurement.

The imaging chain is modelled as pure demagnification followed by
convolution with a rotationally symmetric point spread function.  The
projected 532 nm light is repulsive, so the potential is the blurred
relative intensity times the maximum depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from .core import (
    ConfigurationError,
    EnergyValue,
    FormatError,
    Grid2D,
    InvalidInputError,
    PotentialMap,
    SamplingError,
)
from .io import parse_pgm

DEVICE_SHAPE = (768, 1280)  # rows, columns
DEVICE_PIXEL_PITCH = 20e-6

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
# first zero of J1 and the half-maximum point of the Airy intensity (2 J1(v)/v)^2
AIRY_FIRST_ZERO = special.jn_zeros(1, 1)[0]
AIRY_HALF_MAX = brentq(lambda v: (2 * special.j1(v) / v) ** 2 - 0.5, 1.0, 2.0)
_AIRY_TRUNCATION = special.jn_zeros(1, 5)[-1]


@dataclass(frozen=True)
class SlmPattern:
    """8-bit frame shown on the modulator.

    ``lut`` optionally maps each level to a relative intensity; without it the
    mapping is linear, ``level / 255``.
    """

    pixels: np.ndarray
    pixel_pitch: float = DEVICE_PIXEL_PITCH
    lut: np.ndarray | None = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise InvalidInputError("SLM pattern must be a 2D array")
        if pixels.dtype != np.uint8:
            if np.any(pixels < 0) or np.any(pixels > 255):
                raise InvalidInputError("SLM levels must lie in [0, 255]")
            pixels = np.round(pixels).astype(np.uint8)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)
        if self.lut is not None:
            lut = np.asarray(self.lut, dtype=float)
            if lut.shape != (256,) or lut.min() < 0 or lut.max() > 1:
                raise InvalidInputError("lookup table needs 256 entries in [0, 1]")
            object.__setattr__(self, "lut", lut)

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def intensity(self):
        if self.lut is not None:
            return self.lut[self.pixels]
        return self.pixels / 255.0


def load_slm_pattern(image_bytes: bytes, pixel_pitch=DEVICE_PIXEL_PITCH, expected_shape=DEVICE_SHAPE, lut=None):
    """Decode a P5 graymap.  Pass ``expected_shape=None`` to accept any size."""
    pixels = parse_pgm(image_bytes)
    if expected_shape is not None and pixels.shape != tuple(expected_shape):
        raise FormatError(f"pattern is {pixels.shape[1]}x{pixels.shape[0]}, device expects "
                          f"{expected_shape[1]}x{expected_shape[0]}")
    return SlmPattern(pixels, pixel_pitch, lut)


def grating_pattern(pitch_px: int, phase_px: int = 0, shape=DEVICE_SHAPE, pixel_pitch=DEVICE_PIXEL_PITCH):
    """Binary vertical-stripe grating, referenced to the central column.

    Stripes are ``ceil(pitch/2)`` pixels wide.  A 1-pixel pitch cannot be
    drawn on the pixel lattice and is rendered as single-pixel stripes.
    """
    if int(pitch_px) != pitch_px or pitch_px < 1:
        raise InvalidInputError(f"grating pitch must be an integer >= 1, got {pitch_px}")
    period = max(int(pitch_px), 2)
    on_width = math.ceil(period / 2)
    ny, nx = shape
    u = np.arange(nx) - nx // 2 + int(phase_px)
    row = np.where(np.mod(u, period) < on_width, 255, 0).astype(np.uint8)
    return SlmPattern(np.tile(row, (ny, 1)), pixel_pitch)


@dataclass(frozen=True)
class ImagingSystem:
    magnification: float = 0.036
    psf_model: str = "gaussian"
    psf_fwhm: float = 0.9e-6
    max_depth: EnergyValue = field(default_factory=lambda: EnergyValue.from_microkelvin(2.5))
    field_extent: tuple = (600e-6, 400e-6)

    def __post_init__(self):
        if not 0 < self.magnification < 1:
            raise InvalidInputError(f"magnification must lie in (0, 1), got {self.magnification}")
        if self.psf_model not in ("gaussian", "airy"):
            raise InvalidInputError(f"unknown PSF model {self.psf_model!r}")
        if not self.psf_fwhm > 0:
            raise InvalidInputError("psf_fwhm must be positive")
        if self.max_depth.joules < 0:
            raise InvalidInputError("max_depth must be non-negative")

    def atom_plane_pixel(self, pixel_pitch=DEVICE_PIXEL_PITCH):
        return pixel_pitch * self.magnification


def psf_kernel(sys: ImagingSystem, grid_pitch: float) -> np.ndarray:
    """Discrete, unit-sum PSF sampled on cells of ``grid_pitch``."""
    fwhm = sys.psf_fwhm
    if fwhm <= grid_pitch / 10:
        return np.ones((1, 1))
    if grid_pitch > fwhm / 3:
        raise SamplingError(f"grid pitch {grid_pitch:.3g} m cannot sample a {fwhm:.3g} m PSF "
                            "(need pitch <= fwhm/3)")
    if sys.psf_model == "gaussian":
        sigma = fwhm / FWHM_PER_SIGMA
        radius = 5 * sigma
    else:
        k = 2 * AIRY_HALF_MAX / fwhm
        radius = _AIRY_TRUNCATION / k
    n = int(math.ceil(radius / grid_pitch))
    r = grid_pitch * np.arange(-n, n + 1)
    rr = np.hypot(*np.meshgrid(r, r))
    if sys.psf_model == "gaussian":
        kernel = np.exp(-rr**2 / (2 * sigma**2))
    else:
        v = k * rr
        with np.errstate(invalid="ignore", divide="ignore"):
            kernel = np.where(v > 0, (2 * special.j1(v) / v) ** 2, 1.0)
        kernel[rr > radius] = 0.0
    return kernel / kernel.sum()


def _overlap_matrix(target_centres, pitch, source_edges):
    lo = np.maximum((target_centres - pitch / 2)[:, None], source_edges[None, :-1])
    hi = np.minimum((target_centres + pitch / 2)[:, None], source_edges[None, 1:])
    return np.clip(hi - lo, 0.0, None)


def geometric_image(pattern: SlmPattern, sys: ImagingSystem, target: Grid2D) -> np.ndarray:
    """Area-averaged relative intensity of the demagnified SLM on ``target``.

    The SLM centre sits on the optical axis (world origin).  Pixels whose
    centres fall outside the usable field window are dark.
    """
    a = sys.atom_plane_pixel(pattern.pixel_pitch)
    if target.pitch > a * (1 + 1e-9):
        raise SamplingError(f"target pitch {target.pitch:.3g} m is coarser than the atom-plane "
                            f"SLM pixel {a:.3g} m")
    ny, nx = pattern.shape
    intensity = pattern.intensity.astype(float)
    xc = (np.arange(nx) - (nx - 1) / 2) * a
    yc = (np.arange(ny) - (ny - 1) / 2) * a
    fx, fy = sys.field_extent
    window = (np.abs(yc)[:, None] <= fy / 2) & (np.abs(xc)[None, :] <= fx / 2)
    intensity = np.where(window, intensity, 0.0)
    x_edges = (np.arange(nx + 1) - nx / 2) * a
    y_edges = (np.arange(ny + 1) - ny / 2) * a
    wx = _overlap_matrix(target.x, target.pitch, x_edges)
    wy = _overlap_matrix(target.y, target.pitch, y_edges)
    cols = np.flatnonzero(wx.any(axis=0))
    rows = np.flatnonzero(wy.any(axis=0))
    if cols.size == 0 or rows.size == 0:
        return np.zeros(target.shape)
    sub = intensity[np.ix_(rows, cols)]
    return (wy[:, rows] @ sub @ wx[:, cols].T) / target.pitch**2


def blur(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-padded ('dark surround') convolution, same shape as ``image``."""
    if kernel.shape[0] > image.shape[0] or kernel.shape[1] > image.shape[1]:
        raise ConfigurationError(f"PSF kernel {kernel.shape} is wider than the grid {image.shape}")
    if kernel.size == 1:
        return image * kernel[0, 0]
    return fftconvolve(image, kernel, mode="same")


def project_to_atom_plane(pattern: SlmPattern, sys: ImagingSystem, target: Grid2D) -> PotentialMap:
    """Repulsive potential produced at the atom plane by ``pattern``."""
    image = geometric_image(pattern, sys, target)
    kernel = psf_kernel(sys, target.pitch)
    depth = sys.max_depth.joules
    values = np.clip(blur(image, kernel), 0.0, 1.0) * depth
    return PotentialMap(target, values)


def atom_plane_grating(period: float, target: Grid2D, phase: float = 0.0) -> np.ndarray:
    """Ideal binary square wave of ``period`` along x, area-averaged on ``target``.

    Used to emulate grating test targets whose period is finer than what the
    SLM pixel lattice can draw.
    """
    if not period > 0:
        raise InvalidInputError("grating period must be positive")
    # integral of the 0/1 square wave from -inf reference, evaluated at cell edges
    def cumulative(x):
        u = (x + phase) / period
        whole = np.floor(u)
        frac = u - whole
        return period * (whole / 2 + np.minimum(frac, 0.5))

    lo = target.x - target.pitch / 2
    hi = target.x + target.pitch / 2
    row = (cumulative(hi) - cumulative(lo)) / target.pitch
    return np.tile(row, (target.ny, 1))


@dataclass(frozen=True)
class MtfCurve:
    """Contrast against spatial period (sorted by increasing period)."""

    periods: np.ndarray
    contrasts: np.ndarray
    flags: tuple = ()

    def __post_init__(self):
        periods = np.asarray(self.periods, dtype=float)
        contrasts = np.asarray(self.contrasts, dtype=float)
        if periods.shape != contrasts.shape or periods.ndim != 1:
            raise InvalidInputError("periods and contrasts must be 1D arrays of equal length")
        if np.any(contrasts < 0) or np.any(contrasts > 1):
            raise InvalidInputError("contrast must lie in [0, 1]")
        order = np.argsort(periods, kind="stable")
        object.__setattr__(self, "periods", periods[order])
        object.__setattr__(self, "contrasts", contrasts[order])

    @property
    def frequencies(self):
        return 1.0 / self.periods

    def to_dict(self):
        return {"periods_m": self.periods.tolist(), "contrasts": self.contrasts.tolist(),
                "flags": list(self.flags)}


def grating_contrast(image, period, pitch):
    """Dark-to-light contrast of a vertical-stripe grating image.

    Returns ``(contrast, flat)``.  The column-mean profile is cut into whole
    periods; maxima and minima are averaged across periods.
    """
    profile = np.asarray(image, dtype=float)
    if profile.ndim == 2:
        profile = profile.mean(axis=0)
    samples = period / pitch
    n_periods = int(math.floor(len(profile) / samples + 1e-9))
    if n_periods < 3:
        raise InvalidInputError(f"image holds {n_periods} full periods of {period:.3g} m; need >= 3")
    edges = np.round(samples * np.arange(n_periods + 1)).astype(int)
    highs = [profile[a:b].max() for a, b in zip(edges[:-1], edges[1:])]
    lows = [profile[a:b].min() for a, b in zip(edges[:-1], edges[1:])]
    i_max, i_min = float(np.mean(highs)), float(np.mean(lows))
    if i_max + i_min <= 0 or i_max - i_min <= 0:
        return 0.0, True
    return min(1.0, max(0.0, (i_max - i_min) / (i_max + i_min))), False


def mtf_from_images(pairs, pitch) -> MtfCurve:
    """Contrast curve from ``(period, image)`` pairs sampled at ``pitch``."""
    periods, contrasts, flags = [], [], []
    for period, image in pairs:
        c, flat = grating_contrast(image, period, pitch)
        if flat:
            flags.append(f"flat image at period {period:.4g} m")
        periods.append(period)
        contrasts.append(c)
    return MtfCurve(np.array(periods), np.array(contrasts), tuple(flags))


@dataclass(frozen=True)
class PsfProfile:
    r: np.ndarray
    amplitude: np.ndarray
    first_minimum: float
    fwhm: float
    native_pitch: float  # Nyquist spacing 1/(2 f_max) of the unpadded transform

    def to_dict(self):
        return {"first_minimum_m": self.first_minimum, "fwhm_m": self.fwhm,
                "native_pitch_m": self.native_pitch}


def psf_from_mtf(curve: MtfCurve, pad_factor=8, n_interp=512) -> PsfProfile:
    """Line-spread profile obtained by Fourier transforming the contrast curve.

    The curve is anchored at unit contrast for zero frequency, interpolated
    with a shape-preserving cubic on a uniform frequency grid up to the
    highest measured frequency, zero-padded ``pad_factor`` times and inverse
    transformed.  The even profile is reported against radius.
    """
    if pad_factor < 8:
        raise InvalidInputError("zero padding factor must be >= 8")
    periods = curve.periods
    if len(periods) < 4:
        raise InvalidInputError(f"need >= 4 MTF samples, got {len(periods)}")
    if not np.all(np.isfinite(periods)) or np.any(periods <= 0) or not np.all(np.isfinite(curve.contrasts)):
        raise InvalidInputError("MTF samples must be finite with positive periods")
    if np.any(np.diff(periods) <= 0):
        raise InvalidInputError("MTF samples contain repeated periods; cannot order them")

    freqs = np.concatenate([[0.0], curve.frequencies[::-1]])
    contrast = np.concatenate([[1.0], curve.contrasts[::-1]])
    f_max = freqs[-1]
    fg = np.linspace(0.0, f_max, n_interp)
    cg = np.clip(PchipInterpolator(freqs, contrast)(fg), 0.0, None)
    df = fg[1] - fg[0]
    n_total = 2 * n_interp * pad_factor
    spectrum = np.zeros(n_total)
    spectrum[:n_interp] = cg
    spectrum[n_total - n_interp + 1:] = cg[1:][::-1]
    lsf = np.fft.ifft(spectrum).real[: n_total // 2]
    r = np.arange(n_total // 2) / (n_total * df)
    amplitude = lsf / lsf[0]

    below = np.flatnonzero(amplitude < 0.5)
    if below.size == 0:
        raise InvalidInputError("recovered PSF never drops below half maximum")
    i = below[0]
    r_half = np.interp(0.5, [amplitude[i], amplitude[i - 1]], [r[i], r[i - 1]])

    rising = np.flatnonzero(np.diff(amplitude) > 0)
    if rising.size == 0:
        first_min = float(r[-1])
    else:
        j = rising[0]
        first_min = float(r[j])
        if 0 < j < len(r) - 1:
            y0, y1, y2 = amplitude[j - 1], amplitude[j], amplitude[j + 1]
            denom = y0 - 2 * y1 + y2
            if denom > 0:
                first_min = float(r[j] + 0.5 * (y0 - y2) / denom * (r[1] - r[0]))
    return PsfProfile(r, amplitude, first_min, float(2 * r_half), 1.0 / (2 * f_max))
