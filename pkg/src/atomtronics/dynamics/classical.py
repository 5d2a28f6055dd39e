"""Point-particle ensemble integrated with velocity Verlet."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..core import K_B, M_RB87, ConfigurationError, InvalidInputError, as_joules
from .potentials import PotentialStack, apply_ramp, max_trap_frequency


@dataclass(frozen=True)
class AtomEnsemble:
    positions: np.ndarray  # (n, 2) metres
    velocities: np.ndarray  # (n, 2) m/s
    alive: np.ndarray  # (n,) bool
    mass: float = M_RB87
    rng_seed: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        alive = np.asarray(self.alive, dtype=bool)
        if pos.ndim != 2 or pos.shape[1] != 2 or vel.shape != pos.shape or alive.shape != (len(pos),):
            raise InvalidInputError("positions, velocities and alive flags must have matching lengths")
        if not (np.all(np.isfinite(pos[alive])) and np.all(np.isfinite(vel[alive]))):
            raise InvalidInputError("alive atoms must have finite positions and velocities")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "alive", alive)

    def __len__(self):
        return len(self.positions)

    @property
    def n_alive(self):
        return int(self.alive.sum())


def sample_ensemble(n, temperature, source_radius=1e-6, seed=0, center=(0.0, 0.0), mass=M_RB87):
    """Gaussian cloud with a 2D Maxwell-Boltzmann velocity distribution.

    ``source_radius`` is the rms width per axis.  Identical seeds give
    bit-identical ensembles.
    """
    if n < 1:
        raise InvalidInputError("need at least one atom")
    if temperature < 0 or source_radius < 0:
        raise InvalidInputError("temperature and source radius must be non-negative")
    rng = np.random.default_rng(seed)
    positions = np.asarray(center, dtype=float) + source_radius * rng.standard_normal((n, 2))
    sigma_v = math.sqrt(K_B * temperature / mass)
    velocities = sigma_v * rng.standard_normal((n, 2))
    return AtomEnsemble(positions, velocities, np.ones(n, dtype=bool), mass, seed)


class _Sampler:
    """Bilinear lookups of a stack's components and their gradients."""

    def __init__(self, stack: PotentialStack):
        self.grid = stack.grid
        self.names = list(stack.components)
        p = self.grid.pitch
        self.values = [stack.components[n].values for n in self.names]
        self.grads = []
        for v in self.values:
            gy, gx = np.gradient(v, p) if min(v.shape) > 1 else (np.zeros_like(v), np.zeros_like(v))
            self.grads.append((gx, gy))
        self.nonzero = [bool(np.any(v)) for v in self.values]

    def inside(self, pos):
        g = self.grid
        lo_x, lo_y = g.origin
        hi_x = lo_x + (g.nx - 1) * g.pitch
        hi_y = lo_y + (g.ny - 1) * g.pitch
        return (pos[:, 0] >= lo_x) & (pos[:, 0] <= hi_x) & (pos[:, 1] >= lo_y) & (pos[:, 1] <= hi_y)

    def _weights(self, pos):
        g = self.grid
        fx = (pos[:, 0] - g.origin[0]) / g.pitch
        fy = (pos[:, 1] - g.origin[1]) / g.pitch
        ix = np.clip(np.floor(fx).astype(np.int64), 0, max(g.nx - 2, 0))
        iy = np.clip(np.floor(fy).astype(np.int64), 0, max(g.ny - 2, 0))
        tx = np.clip(fx - ix, 0.0, 1.0)
        ty = np.clip(fy - iy, 0.0, 1.0)
        return ix, iy, tx, ty

    @staticmethod
    def _interp(arr, ix, iy, tx, ty):
        ix1 = np.minimum(ix + 1, arr.shape[1] - 1)
        iy1 = np.minimum(iy + 1, arr.shape[0] - 1)
        return ((1 - ty) * ((1 - tx) * arr[iy, ix] + tx * arr[iy, ix1])
                + ty * ((1 - tx) * arr[iy1, ix] + tx * arr[iy1, ix1]))

    def acceleration(self, pos, powers, mass):
        acc = np.zeros_like(pos)
        active = [(i, powers[n]) for i, n in enumerate(self.names) if self.nonzero[i] and powers[n] != 0.0]
        if not active:
            return acc
        w = self._weights(pos)
        for i, p in active:
            gx, gy = self.grads[i]
            acc[:, 0] -= p * self._interp(gx, *w)
            acc[:, 1] -= p * self._interp(gy, *w)
        return acc / mass

    def potential(self, pos, powers):
        u = np.zeros(len(pos))
        active = [(i, powers[n]) for i, n in enumerate(self.names) if self.nonzero[i] and powers[n] != 0.0]
        if not active:
            return u
        w = self._weights(pos)
        for i, p in active:
            u += p * self._interp(self.values[i], *w)
        return u


def check_time_step(stack: PotentialStack, dt, powers=None, mass=M_RB87):
    f_max = max_trap_frequency(stack.with_powers(powers or stack.powers).composed(), stack.grid.pitch, mass)
    if f_max > 0 and dt > 0.1 / f_max:
        raise ConfigurationError(f"time step {dt:.3g} s exceeds 0.1/f_max = {0.1 / f_max:.3g} s "
                                 f"(f_max = {f_max:.4g} Hz)")
    return f_max


def total_energy(ens: AtomEnsemble, stack: PotentialStack):
    """Kinetic plus interpolated potential energy per atom (J)."""
    sampler = _Sampler(stack)
    ke = 0.5 * ens.mass * np.sum(ens.velocities**2, axis=1)
    return ke + sampler.potential(ens.positions, stack.powers)


class ClassicalIntegrator:
    """Velocity Verlet over a (possibly ramped) potential stack.

    Atoms whose total energy exceeds ``escape_energy`` or that leave the
    grid are marked dead and frozen.  ``lifetime`` adds an optional
    exponential one-body loss drawn from a seeded generator.
    """

    def __init__(self, stack: PotentialStack, dt, escape_energy=None, lifetime=None,
                 ramp=None, ramp_offset=0.0, seed=0, check=True):
        if not dt > 0:
            raise ConfigurationError("time step must be positive")
        self.stack = stack
        self.sampler = _Sampler(stack)
        self.dt = dt
        self.escape_energy = None if escape_energy is None else as_joules(escape_energy)
        self.lifetime = lifetime
        self.ramp = ramp
        self.ramp_offset = ramp_offset
        self.rng = np.random.default_rng([seed, 1])
        if check:
            peak = dict(stack.powers)
            if ramp is not None:
                peak = {n: 1.0 for n in stack.components}
            check_time_step(stack, dt, peak)

    def powers_at(self, t):
        if self.ramp is None:
            return self.stack.powers
        ramped = apply_ramp(self.ramp, t + self.ramp_offset)
        return {n: ramped.get(n, self.stack.powers[n]) for n in self.stack.components}

    def run(self, ens: AtomEnsemble, steps, t0=0.0) -> AtomEnsemble:
        pos = ens.positions.copy()
        vel = ens.velocities.copy()
        alive = ens.alive.copy()
        m = ens.mass
        dt = self.dt
        powers = self.powers_at(t0)
        acc = np.zeros_like(pos)
        acc[alive] = self.sampler.acceleration(pos[alive], powers, m)
        for k in range(steps):
            t_next = t0 + (k + 1) * dt
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            p, v, a = pos[idx], vel[idx], acc[idx]
            v_half = v + 0.5 * dt * a
            p_new = p + dt * v_half
            powers = self.powers_at(t_next)
            inside = self.sampler.inside(p_new)
            a_new = self.sampler.acceleration(p_new, powers, m)
            v_new = v_half + 0.5 * dt * a_new
            keep = inside
            if self.escape_energy is not None:
                e = 0.5 * m * np.sum(v_new**2, axis=1) + self.sampler.potential(p_new, powers)
                keep = keep & (e <= self.escape_energy)
            if self.lifetime:
                keep = keep & (self.rng.random(idx.size) >= dt / self.lifetime)
            live = idx[keep]
            pos[live], vel[live], acc[live] = p_new[keep], v_new[keep], a_new[keep]
            alive[idx[~keep]] = False
        return replace(ens, positions=pos, velocities=vel, alive=alive)


def step_classical(ens: AtomEnsemble, stack: PotentialStack, dt, escape_energy=None) -> AtomEnsemble:
    """One velocity-Verlet step."""
    return ClassicalIntegrator(stack, dt, escape_energy=escape_energy).run(ens, 1)
