"""Two-beam 1064 nm interference lattice used as the planar (2D) trap."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    G_GRAVITY,
    H_PLANCK,
    HBAR,
    K_B,
    M_RB87,
    EnergyValue,
    Grid2D,
    InvalidInputError,
    PotentialMap,
    SamplingError,
    as_joules,
)


@dataclass(frozen=True)
class BeamSpec:
    wavelength: float = 1064e-9
    waist_x: float = 320e-6
    waist_z: float = 60e-6  # 16:3 aspect
    power_relative: float = 1.0
    tilt: float = math.radians(3.0)

    def __post_init__(self):
        if not (self.waist_x > 0 and self.waist_z > 0 and self.wavelength > 0):
            raise InvalidInputError("beam waists and wavelength must be positive")
        if not 0 <= self.power_relative <= 1:
            raise InvalidInputError("relative beam power must lie in [0, 1]")


def fringe_spacing_from_angle(wavelength, theta_full):
    """Period ``lambda / (2 sin(theta/2))`` of two beams crossing at ``theta_full``."""
    if not 0 < theta_full < math.pi + 1e-12:
        raise InvalidInputError(f"crossing angle must lie in (0, pi], got {theta_full}")
    return wavelength / (2 * math.sin(theta_full / 2))


def angle_from_fringe_spacing(wavelength, spacing):
    if spacing < wavelength / 2:
        raise InvalidInputError(f"fringe spacing {spacing} m is below lambda/2")
    return 2 * math.asin(wavelength / (2 * spacing))


@dataclass(frozen=True)
class TrapConfig:
    """Planar trap parameters.

    Exactly one of ``fringe_spacing`` and ``crossing_angle`` is given; the
    other is derived from the beam wavelength.  ``depth_u0`` sets the lattice
    depth used for the vertical frequency, ``escape_depth`` is the energy
    above which atoms are treated as lost.
    """

    beam_a: BeamSpec = field(default_factory=BeamSpec)
    beam_b: BeamSpec = field(default_factory=lambda: BeamSpec(tilt=-math.radians(3.0)))
    fringe_spacing: float | None = None
    crossing_angle: float | None = None
    depth_u0: EnergyValue = field(default_factory=lambda: EnergyValue.from_microkelvin(0.878))
    escape_depth: EnergyValue = field(default_factory=lambda: EnergyValue.from_microkelvin(2.0))
    inplane_freq: float = 1.0
    rayleigh_range: float = 1.6e-3
    gravity: bool = False
    inplane_envelope_depth: EnergyValue | None = None
    mass: float = M_RB87

    def __post_init__(self):
        lam = self.beam_a.wavelength
        if self.fringe_spacing is not None and self.crossing_angle is not None:
            raise InvalidInputError("give either fringe_spacing or crossing_angle, not both")
        if self.fringe_spacing is None and self.crossing_angle is None:
            object.__setattr__(self, "fringe_spacing", 8e-6)
        if self.fringe_spacing is None:
            object.__setattr__(self, "fringe_spacing", fringe_spacing_from_angle(lam, self.crossing_angle))
        else:
            if not self.fringe_spacing > 0:
                raise InvalidInputError("fringe spacing must be positive")
            object.__setattr__(self, "crossing_angle", angle_from_fringe_spacing(lam, self.fringe_spacing))
        if as_joules(self.depth_u0) < 0:
            raise InvalidInputError("depth_u0 must be non-negative")
        if self.inplane_freq < 0:
            raise InvalidInputError("in-plane frequency must be non-negative")

    @property
    def u0(self):
        return as_joules(self.depth_u0)

    @property
    def envelope_waist(self):
        # overlap of the two vertical gaussians
        return 1.0 / math.sqrt(1 / self.beam_a.waist_z**2 + 1 / self.beam_b.waist_z**2) * math.sqrt(2)

    def envelope(self, z):
        w = self.envelope_waist
        return np.exp(-2 * np.asarray(z) ** 2 / w**2)


@dataclass(frozen=True)
class VerticalProfile:
    z: np.ndarray
    potential: np.ndarray  # joules
    minima: np.ndarray
    depths: np.ndarray

    def to_csv(self, path):
        from .io import write_trace_csv

        write_trace_csv(path, self.z, self.potential, header=("z_m", "U_J"))


def _profile_values(cfg, z, gravity):
    d = cfg.fringe_spacing
    u = -cfg.u0 * cfg.envelope(z) * np.cos(np.pi * z / d) ** 2
    if gravity:
        u = u + cfg.mass * G_GRAVITY * z
    return u


def _local_extrema(u):
    interior = np.arange(1, len(u) - 1)
    minima = interior[(u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:])]
    maxima = interior[(u[1:-1] > u[:-2]) & (u[1:-1] >= u[2:])]
    return minima, maxima


def vertical_profile(cfg: TrapConfig, z_range, n, gravity=None) -> VerticalProfile:
    """Sample ``U(z)`` over ``[-z_range, z_range]`` with ``n`` points.

    ``gravity`` overrides ``cfg.gravity`` when given.
    """
    gravity = cfg.gravity if gravity is None else gravity
    d = cfg.fringe_spacing
    if n < 2:
        raise SamplingError("need at least two samples")
    step = 2 * z_range / (n - 1)
    if step > d / 16:
        raise SamplingError(f"{d / step:.1f} samples per fringe; need >= 16")
    z = np.linspace(-z_range, z_range, n)
    u = _profile_values(cfg, z, gravity)
    minima, maxima = _local_extrema(u)
    depths = []
    for i in minima:
        left = maxima[maxima < i]
        right = maxima[maxima > i]
        barriers = []
        if left.size:
            barriers.append(u[left[-1]])
        if right.size:
            barriers.append(u[right[0]])
        depths.append(min(barriers) - u[i] if barriers else np.nan)
    return VerticalProfile(z, u, z[minima], np.array(depths))


def effective_depth(cfg: TrapConfig, samples_per_fringe=256) -> EnergyValue:
    """Barrier from the central minimum to the lowest neighbouring saddle, with gravity."""
    d = cfg.fringe_spacing
    n = int(6 * samples_per_fringe) + 1
    prof = vertical_profile(cfg, 3 * d, n, gravity=True)
    if prof.minima.size == 0:
        return EnergyValue(0.0)
    central = np.argmin(np.abs(prof.minima))
    depth = prof.depths[central]
    return EnergyValue(0.0 if not np.isfinite(depth) else float(max(depth, 0.0)))


def vertical_trap_frequency(cfg: TrapConfig, samples_per_fringe=64):
    """Vertical frequency in Hz as ``(analytic, curvature)``.

    The analytic value uses the harmonic expansion of the cos^2 lattice.  The
    curvature value takes a three-point second difference of the sampled
    profile at its central minimum.
    """
    u0 = cfg.u0
    if not u0 > 0:
        raise InvalidInputError("vertical frequency needs a positive lattice depth")
    d = cfg.fringe_spacing
    analytic = (1 / (2 * math.pi)) * (math.pi / d) * math.sqrt(2 * u0 / cfg.mass)

    h = d / samples_per_fringe
    z = h * np.arange(-samples_per_fringe, samples_per_fringe + 1)
    u = _profile_values(cfg, z, cfg.gravity)
    i = int(np.argmin(u))
    i = min(max(i, 1), len(z) - 2)
    curvature = (u[i + 1] - 2 * u[i] + u[i - 1]) / h**2
    curvature_freq = math.sqrt(max(curvature, 0.0) / cfg.mass) / (2 * math.pi)
    return analytic, curvature_freq


def calibrate_depth_for_frequency(f_target, d, mass=M_RB87) -> EnergyValue:
    """Lattice depth whose harmonic vertical frequency equals ``f_target``."""
    if not f_target > 0:
        raise InvalidInputError("target frequency must be positive")
    return EnergyValue(0.5 * mass * (2 * math.pi * f_target * d / math.pi) ** 2)


def inplane_potential(cfg: TrapConfig, grid: Grid2D) -> PotentialMap:
    """Weak radial confinement of the light sheet."""
    if max(grid.extent) > 2 * cfg.rayleigh_range:
        raise InvalidInputError("grid extends beyond the Rayleigh range of the light sheet")
    x, y = grid.meshgrid()
    r2 = x**2 + y**2
    k = cfg.mass * (2 * math.pi * cfg.inplane_freq) ** 2
    harmonic = 0.5 * k * r2
    if cfg.inplane_envelope_depth is None or k == 0:
        return PotentialMap(grid, harmonic)
    depth = as_joules(cfg.inplane_envelope_depth)
    return PotentialMap(grid, depth * (1 - np.exp(-harmonic / depth)))


def dimensionality_ratio(f_z, temperature):
    """hbar*omega_z / (k_B T)."""
    if not temperature > 0:
        raise InvalidInputError("temperature must be positive")
    return HBAR * 2 * math.pi * f_z / (K_B * temperature)


def synthetic_fringe_image(cfg: TrapConfig, phase, noise_amplitude, grid: Grid2D,
                           contrast=1.0, background=1.0, rng=None):
    """Camera-like fringe image; the fringe axis z runs along grid rows (y)."""
    d = cfg.fringe_spacing
    if grid.pitch > d / 8:
        raise SamplingError(f"{d / grid.pitch:.1f} pixels per fringe; need >= 8")
    z = grid.y
    profile = background + contrast * np.cos(2 * np.pi * z / d + phase)
    image = np.repeat(profile[:, None], grid.nx, axis=1)
    if noise_amplitude:
        rng = np.random.default_rng(rng)
        image = image + noise_amplitude * rng.standard_normal(image.shape)
    return image


def trap_report(cfg: TrapConfig, temperature=8e-9):
    """Summary of the derived trap diagnostics (JSON friendly)."""
    analytic, curvature = vertical_trap_frequency(cfg)
    nk = K_B * 1e-9
    return {
        "fringe_spacing_m": cfg.fringe_spacing,
        "crossing_angle_deg": math.degrees(cfg.crossing_angle),
        "depth_u0_nK": cfg.u0 / nk,
        "vertical_frequency_analytic_hz": analytic,
        "vertical_frequency_curvature_hz": curvature,
        "effective_depth_under_gravity_nK": effective_depth(cfg).joules / nk,
        "dimensionality_ratio": dimensionality_ratio(analytic, temperature),
        "temperature_K": temperature,
        "inplane_frequency_hz": cfg.inplane_freq,
        "h_times_fz_nK": H_PLANCK * analytic / nk,
    }
