"""Split-step Fourier propagation of a 2D matter wave.

Real-time evolution uses symmetric (Strang) splitting with an exact
spectral kinetic step; the ground state is found by the same splitting in
imaginary time with renormalisation after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import gaussian_filter

from ..core import (
    H_PLANCK,
    HBAR,
    K_B,
    M_RB87,
    ConfigurationError,
    ConvergenceError,
    Grid2D,
    InvalidInputError,
    PotentialMap,
    as_joules,
)
from .potentials import PotentialStack, apply_ramp


def thermal_wavelength(temperature, mass=M_RB87):
    return H_PLANCK / math.sqrt(2 * math.pi * mass * K_B * temperature)


def max_pitch_for_temperature(temperature, mass=M_RB87):
    """Coarsest grid pitch allowed for a wave run at ``temperature``."""
    return thermal_wavelength(temperature, mass) / 8


@dataclass(frozen=True)
class Wavefunction:
    """Complex amplitude on a grid, normalised as ``sum |psi|^2 * pitch^2``."""

    grid: Grid2D
    amplitudes: np.ndarray
    interaction_g: float = 0.0
    temperature_scale: float | None = None
    mass: float = M_RB87

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex)
        if psi.shape != self.grid.shape:
            raise InvalidInputError(f"amplitude shape {psi.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "amplitudes", psi)
        if self.temperature_scale is not None:
            limit = max_pitch_for_temperature(self.temperature_scale, self.mass)
            if self.grid.pitch > limit * (1 + 1e-9):
                raise ConfigurationError(
                    f"grid pitch {self.grid.pitch:.3g} m exceeds lambda_dB/8 = {limit:.3g} m "
                    f"at T = {self.temperature_scale:.3g} K")

    @property
    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_area)

    def normalized(self):
        return replace(self, amplitudes=self.amplitudes / math.sqrt(self.norm))

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_area)


def wavenumbers(grid: Grid2D):
    kx = 2 * np.pi * sfft.fftfreq(grid.nx, d=grid.pitch)
    ky = 2 * np.pi * sfft.fftfreq(grid.ny, d=grid.pitch)
    return kx[None, :] ** 2 + ky[:, None] ** 2


def gaussian_packet(grid: Grid2D, sigma, center=(0.0, 0.0), k0=(0.0, 0.0), mass=M_RB87, g=0.0):
    """Minimum-uncertainty packet whose density has rms width ``sigma`` per axis."""
    x, y = grid.meshgrid()
    dx, dy = x - center[0], y - center[1]
    psi = np.exp(-(dx**2 + dy**2) / (4 * sigma**2) + 1j * (k0[0] * dx + k0[1] * dy))
    return Wavefunction(grid, psi, g, mass=mass).normalized()


def thermal_field(grid: Grid2D, temperature, region=None, seed=0, energy_cutoff=4.0,
                  smoothing=2e-6, mass=M_RB87):
    """Random-phase field with Boltzmann-weighted plane-wave occupations.

    Mode amplitudes are complex gaussians with variance ``exp(-E_k/k_B T)``,
    truncated above ``energy_cutoff * k_B T``.  The field is then confined to
    ``region`` (boolean mask) softened by a gaussian of width ``smoothing``.
    """
    rng = np.random.default_rng(seed)
    k2 = wavenumbers(grid)
    e_k = HBAR**2 * k2 / (2 * mass)
    kt = K_B * temperature
    weight = np.where(e_k <= energy_cutoff * kt, np.exp(-e_k / (2 * kt)), 0.0)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    psi = sfft.ifft2(noise * weight)
    if region is not None:
        envelope = np.asarray(region, dtype=float)
        if smoothing:
            envelope = gaussian_filter(envelope, smoothing / grid.pitch, mode="constant")
        psi = psi * envelope
    return Wavefunction(grid, psi, 0.0, temperature, mass).normalized()


def absorbing_mask(grid: Grid2D, fraction=0.08, strength=0.1):
    """Multiplicative cos^2 edge mask covering ``fraction`` of each axis per side."""
    def axis(n):
        s = np.zeros(n)
        width = max(1, int(round(fraction * n)))
        ramp = (np.arange(width)[::-1] + 1) / width  # 1 at the edge cell
        s[:width] = ramp
        s[n - width:] = ramp[::-1]
        return np.cos(0.5 * np.pi * s) ** 2
    mask = np.outer(axis(grid.ny), axis(grid.nx))
    return mask**strength


class SplitStepPropagator:
    """Strang-split propagator for a fixed grid, mass and time step.

    The stack may be ramped; the potential phase is rebuilt whenever the
    beam powers change.  ``potential_cap`` clips the composed potential from
    above before the stability check.
    """

    def __init__(self, stack: PotentialStack, dt, mass=M_RB87, g=0.0, absorber=None,
                 potential_cap=None, ramp=None, ramp_offset=0.0, workers=None, max_phase=0.1):
        self.stack = stack
        self.grid = stack.grid
        self.dt = dt
        self.mass = mass
        self.g = g
        self.absorber = absorber
        self.cap = None if potential_cap is None else as_joules(potential_cap)
        self.ramp = ramp
        self.ramp_offset = ramp_offset
        self.workers = workers
        self.max_phase = max_phase
        self.kinetic = np.exp(-1j * HBAR * wavenumbers(self.grid) * dt / (2 * mass))
        self._powers = None
        self._u = None

    def powers_at(self, t):
        if self.ramp is None:
            return self.stack.powers
        ramped = apply_ramp(self.ramp, t + self.ramp_offset)
        return {n: ramped.get(n, self.stack.powers[n]) for n in self.stack.components}

    def potential(self, t=0.0):
        powers = self.powers_at(t)
        if powers != self._powers:
            u = self.stack.with_powers(powers).composed()
            if self.cap is not None:
                u = np.minimum(u, self.cap)
            self._u, self._powers = u, powers
            self._phase_cache = {}
        return self._u

    def check(self, psi, t=0.0):
        u = self.potential(t)
        peak = float(np.max(np.abs(u)))
        if self.g:
            peak += abs(self.g) * float(np.max(np.abs(psi) ** 2))
        phase = abs(self.dt) * peak / HBAR
        if phase > self.max_phase:
            raise ConfigurationError(
                f"potential phase per step {phase:.3g} rad exceeds {self.max_phase} "
                f"(dt = {self.dt:.3g} s, max|U| = {peak:.3g} J)")

    def _phase(self, fraction):
        cache = self._phase_cache
        if fraction not in cache:
            cache[fraction] = np.exp(-1j * self._u * (fraction * self.dt) / HBAR)
        return cache[fraction]

    def _fft_kinetic(self, psi):
        out = sfft.fft2(psi, workers=self.workers, overwrite_x=True)
        out *= self.kinetic
        return sfft.ifft2(out, workers=self.workers, overwrite_x=True)

    def evolve(self, wf: Wavefunction, steps, t0=0.0) -> Wavefunction:
        psi = wf.amplitudes.copy()
        self.check(psi, t0)
        if steps <= 0:
            return wf
        if self.g == 0.0 and self.ramp is None:
            self.potential(t0)
            half = self._phase(0.5)
            full = self._phase(1.0)
            if self.absorber is not None:
                full = full * self.absorber
                half_abs = half * self.absorber
            else:
                half_abs = half
            psi *= half
            for k in range(steps):
                psi = self._fft_kinetic(psi)
                psi *= full if k < steps - 1 else half_abs
        else:
            for k in range(steps):
                t = t0 + k * self.dt
                psi = self._nonlinear_half(psi, t)
                psi = self._fft_kinetic(psi)
                psi = self._nonlinear_half(psi, t + self.dt)
                if self.absorber is not None:
                    psi *= self.absorber
        return replace(wf, amplitudes=psi)

    def _nonlinear_half(self, psi, t):
        self.potential(t)
        if self.g == 0.0:
            return psi * self._phase(0.5)
        u = self._u + self.g * np.abs(psi) ** 2
        return psi * np.exp(-1j * u * (0.5 * self.dt) / HBAR)


def evolve_wave(wf: Wavefunction, stack: PotentialStack, dt, steps, absorber=None,
                potential_cap=None, workers=None) -> Wavefunction:
    """Advance ``wf`` by ``steps`` steps of ``dt`` (negative ``dt`` runs backwards)."""
    prop = SplitStepPropagator(stack, dt, wf.mass, wf.interaction_g, absorber, potential_cap,
                               workers=workers)
    return prop.evolve(wf, steps)


def energy(wf: Wavefunction, potential, workers=None):
    """Energy functional ``<T> + <U> + g/2 int |psi|^4`` per unit norm (J)."""
    u = potential.values if isinstance(potential, PotentialMap) else np.asarray(potential)
    psi = wf.amplitudes
    area = wf.grid.cell_area
    norm = np.sum(np.abs(psi) ** 2) * area
    spec = sfft.fft2(psi, workers=workers)
    kinetic = HBAR**2 / (2 * wf.mass) * np.sum(wavenumbers(wf.grid) * np.abs(spec) ** 2) / psi.size * area
    dens = np.abs(psi) ** 2
    pot = np.sum(u * dens) * area
    inter = 0.5 * wf.interaction_g * np.sum(dens**2) * area
    return float((kinetic + pot + inter) / norm)


def chemical_potential(wf: Wavefunction, potential, workers=None):
    u = potential.values if isinstance(potential, PotentialMap) else np.asarray(potential)
    e = energy(wf, u, workers)
    dens = np.abs(wf.amplitudes) ** 2
    area = wf.grid.cell_area
    return e + 0.5 * wf.interaction_g * float(np.sum(dens**2) * area / (np.sum(dens) * area))


def ground_state(potential: PotentialMap, g=0.0, dtau=5e-5, tol=1e-10, max_iter=100000,
                 check_every=10, initial=None, mass=M_RB87, workers=None) -> Wavefunction:
    """Lowest-energy normalised state by imaginary-time split-step relaxation.

    Converged when the energy changes by less than ``tol`` (relative) per
    step, averaged over ``check_every`` steps.
    """
    grid = potential.grid
    u = np.asarray(potential.values, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("potential must be finite (bounded below)")
    u_shift = u - u.min()
    kinetic = np.exp(-HBAR * wavenumbers(grid) * dtau / (2 * mass))
    area = grid.cell_area

    if initial is None:
        psi = np.ones(grid.shape, dtype=complex)
    else:
        psi = np.asarray(initial.amplitudes if isinstance(initial, Wavefunction) else initial, dtype=complex).copy()
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * area)
    half_linear = np.exp(-u_shift * dtau / (2 * HBAR))

    def half(psi):
        if g == 0.0:
            return psi * half_linear
        return psi * np.exp(-(u_shift + g * np.abs(psi) ** 2) * dtau / (2 * HBAR))

    e_old = energy(Wavefunction(grid, psi, g, mass=mass), u, workers)
    for it in range(1, max_iter + 1):
        psi = half(psi)
        psi = sfft.ifft2(sfft.fft2(psi, workers=workers, overwrite_x=True) * kinetic,
                         workers=workers, overwrite_x=True)
        psi = half(psi)
        psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * area)
        if it % check_every == 0:
            e_new = energy(Wavefunction(grid, psi, g, mass=mass), u, workers)
            change = abs(e_new - e_old) / max(abs(e_new), 1e-300) / check_every
            if change < tol:
                return Wavefunction(grid, psi, g, mass=mass)
            e_old = e_new
    raise ConvergenceError(f"imaginary-time relaxation did not converge in {max_iter} steps",
                           residual=change)
