"""Beam power ramps and the power-weighted stack of potential components."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import M_RB87, EnergyValue, Grid2D, InvalidInputError, PotentialMap, as_joules

BEAMS = ("co2", "planar_1064", "pattern_532")

# absolute power for relative power 1, in watts
FULL_POWER_W = {"co2": 0.050, "planar_1064": 8.0, "pattern_532": 3.0}


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    p_start: float
    p_end: float


@dataclass(frozen=True)
class RampSchedule:
    """Piecewise-linear relative power for each beam."""

    segments: dict

    def __post_init__(self):
        clean = {}
        for beam, segs in self.segments.items():
            if beam not in BEAMS:
                raise InvalidInputError(f"unknown beam {beam!r}; expected one of {BEAMS}")
            segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in segs)
            if not segs:
                raise InvalidInputError(f"beam {beam!r} has no ramp segments")
            for s in segs:
                if not s.t_end > s.t_start:
                    raise InvalidInputError(f"{beam}: segment end {s.t_end} must follow start {s.t_start}")
                if not (0 <= s.p_start <= 1 and 0 <= s.p_end <= 1):
                    raise InvalidInputError(f"{beam}: relative powers must lie in [0, 1]")
            for a, b in zip(segs[:-1], segs[1:]):
                if a.t_end != b.t_start:
                    raise InvalidInputError(f"{beam}: segments are not contiguous at t={a.t_end}")
                if a.p_end != b.p_start:
                    raise InvalidInputError(f"{beam}: power jumps at t={a.t_end}")
            clean[beam] = segs
        for beam in BEAMS:
            clean.setdefault(beam, (Segment(0.0, 1.0, 0.0, 0.0),))
        object.__setattr__(self, "segments", clean)

    @property
    def end_time(self):
        return max(segs[-1].t_end for segs in self.segments.values())

    def to_dict(self):
        return {beam: [[s.t_start, s.t_end, s.p_start, s.p_end] for s in segs]
                for beam, segs in self.segments.items()}


def default_ramp(pattern_during_loading=0.0):
    """Loading sequence: 1 s linear ramp, 100 ms hold, 20 ms CO2 release.

    The pattern beam switches on while the CO2 beams ramp down.
    """
    p = pattern_during_loading
    return RampSchedule({
        "co2": [(0.0, 1.0, 1.0, 0.2), (1.0, 1.1, 0.2, 0.2), (1.1, 1.12, 0.2, 0.0)],
        "planar_1064": [(0.0, 1.0, 0.0, 1.0), (1.0, 1.12, 1.0, 1.0)],
        "pattern_532": [(0.0, 1.1, p, p), (1.1, 1.12, p, 1.0)],
    })


RELEASE_TIME = 1.12


def _power_at(segs, t):
    if t <= segs[0].t_start:
        return segs[0].p_start
    for s in segs:
        if t < s.t_end:
            return s.p_start + (s.p_end - s.p_start) * (t - s.t_start) / (s.t_end - s.t_start)
        if t == s.t_end:
            return s.p_end
    return segs[-1].p_end


def apply_ramp(sched: RampSchedule, t: float) -> dict:
    """Relative power of every beam at time ``t``; the final value is held."""
    if t < 0:
        raise InvalidInputError("ramp time must be non-negative")
    return {beam: _power_at(segs, t) for beam, segs in sched.segments.items()}


def co2_potential(grid: Grid2D, depth=EnergyValue.from_nanokelvin(100.0), waist=30e-6) -> PotentialMap:
    """Attractive crossed-beam dimple, seen from above as a round gaussian."""
    x, y = grid.meshgrid()
    return PotentialMap(grid, -as_joules(depth) * np.exp(-2 * (x**2 + y**2) / waist**2))


@dataclass(frozen=True)
class PotentialStack:
    """Named components on one grid, composed as ``sum(p_i * U_i)``."""

    components: dict
    powers: dict = field(default_factory=dict)

    def __post_init__(self):
        grids = {c.grid for c in self.components.values()}
        if len(grids) > 1:
            raise InvalidInputError("all stack components must share one grid")
        if not grids:
            raise InvalidInputError("potential stack needs at least one component")
        powers = {name: float(self.powers.get(name, 1.0)) for name in self.components}
        object.__setattr__(self, "powers", powers)

    @property
    def grid(self):
        return next(iter(self.components.values())).grid

    def with_powers(self, powers):
        merged = dict(self.powers)
        merged.update({k: v for k, v in powers.items() if k in self.components})
        return PotentialStack(self.components, merged)

    def composed(self) -> np.ndarray:
        total = np.zeros(self.grid.shape)
        for name, comp in self.components.items():
            p = self.powers[name]
            if p != 0.0:
                total += p * comp.values
        return total

    def composed_map(self) -> PotentialMap:
        return PotentialMap(self.grid, self.composed())

    def is_zero(self):
        return all(self.powers[n] == 0.0 or not np.any(c.values) for n, c in self.components.items())


def max_trap_frequency(values, pitch, mass=M_RB87):
    """Largest local oscillation frequency (Hz) implied by positive curvature."""
    values = np.asarray(values)
    curv = 0.0
    if values.shape[1] >= 3:
        curv = max(curv, float(np.max(values[:, 2:] - 2 * values[:, 1:-1] + values[:, :-2])))
    if values.shape[0] >= 3:
        curv = max(curv, float(np.max(values[2:, :] - 2 * values[1:-1, :] + values[:-2, :])))
    curv /= pitch**2
    return math.sqrt(max(curv, 0.0) / mass) / (2 * math.pi)


def stack_max_frequency(stack: PotentialStack, powers=None, mass=M_RB87):
    """Upper bound on the trap frequency over the given relative powers."""
    powers = stack.powers if powers is None else powers
    peak = stack.with_powers(powers).composed()
    return max_trap_frequency(peak, stack.grid.pitch, mass)
