"""Physical constants, energy units and the square-pitched 2D grid.

Everything inside the package works in SI units (m, s, J).  Nanokelvin,
microkelvin and hertz only show up at the edges, through `EnergyValue`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class AtomtronicsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AtomtronicsError, ValueError):
    """An argument is outside the domain of the operation."""


class SamplingError(AtomtronicsError, ValueError):
    """A grid is too coarse for the feature it has to represent."""


class ConfigurationError(AtomtronicsError, ValueError):
    """A combination of settings is inconsistent or unstable."""


class FormatError(AtomtronicsError, ValueError):
    """A file payload does not follow the expected format."""


class ConvergenceError(AtomtronicsError, RuntimeError):
    """An iterative procedure did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class PhysicalConstants:
    k_B: float = 1.380649e-23
    hbar: float = 1.054571817e-34
    mass_rb87: float = 1.443160648e-25
    g_gravity: float = 9.80665
    wavelength_pattern: float = 532e-9
    wavelength_trap: float = 1064e-9

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise InvalidInputError(f"{name} must be strictly positive, got {value}")

    @property
    def h(self):
        return 2 * math.pi * self.hbar


CONSTANTS = PhysicalConstants()

K_B = CONSTANTS.k_B
HBAR = CONSTANTS.hbar
H_PLANCK = CONSTANTS.h
M_RB87 = CONSTANTS.mass_rb87
G_GRAVITY = CONSTANTS.g_gravity

# joules per unit
_UNIT_SCALE = {
    "joule": 1.0,
    "kB_nanokelvin": K_B * 1e-9,
    "hertz_times_h": H_PLANCK,
}
ENERGY_UNITS = tuple(_UNIT_SCALE)


@dataclass(frozen=True)
class EnergyValue:
    """A scalar energy tagged with its unit."""

    value: float
    unit: str = "joule"

    def __post_init__(self):
        if self.unit not in _UNIT_SCALE:
            raise InvalidInputError(
                f"unknown energy unit {self.unit!r}; expected one of {ENERGY_UNITS}"
            )

    @classmethod
    def from_microkelvin(cls, value):
        return cls(value * 1e3, "kB_nanokelvin")

    @classmethod
    def from_nanokelvin(cls, value):
        return cls(value, "kB_nanokelvin")

    @property
    def joules(self):
        return self.value * _UNIT_SCALE[self.unit]

    @property
    def nanokelvin(self):
        return convert_energy(self, "kB_nanokelvin").value

    def to(self, unit):
        return convert_energy(self, unit)


def convert_energy(value: EnergyValue, target_unit: str) -> EnergyValue:
    """Express `value` in `target_unit`."""
    if target_unit not in _UNIT_SCALE:
        raise InvalidInputError(
            f"unknown energy unit {target_unit!r}; expected one of {ENERGY_UNITS}"
        )
    if target_unit == value.unit:
        return value
    return EnergyValue(value.value * _UNIT_SCALE[value.unit] / _UNIT_SCALE[target_unit], target_unit)


def as_joules(energy) -> float:
    """Accept either an `EnergyValue` or a bare float already in joules."""
    if isinstance(energy, EnergyValue):
        return energy.joules
    return float(energy)


@dataclass(frozen=True)
class Grid2D:
    """Uniform square grid.

    Arrays living on the grid have shape ``(ny, nx)``: row index is y,
    column index is x.  ``origin`` is the world position of the centre of
    cell ``(0, 0)``.
    """

    nx: int
    ny: int
    pitch: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise InvalidInputError(f"grid counts must be positive integers, got {self.nx}x{self.ny}")
        if not (self.pitch > 0 and math.isfinite(self.pitch)):
            raise InvalidInputError(f"grid pitch must be positive, got {self.pitch}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def centered(cls, extent_x, extent_y, pitch):
        """Grid covering ``extent_x`` by ``extent_y`` metres, centred on (0, 0)."""
        nx = max(1, int(round(extent_x / pitch)))
        ny = max(1, int(round(extent_y / pitch)))
        return cls(nx, ny, pitch, (-(nx - 1) * pitch / 2, -(ny - 1) * pitch / 2))

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def x(self):
        return self._axis(self.origin[0], self.nx)

    @property
    def y(self):
        return self._axis(self.origin[1], self.ny)

    def _axis(self, start, n):
        # built about the axis midpoint so that centred grids are exactly mirror-symmetric
        mid = start + (n - 1) * self.pitch / 2
        return mid + self.pitch * (np.arange(n) - (n - 1) / 2)

    @property
    def extent(self):
        return (self.nx * self.pitch, self.ny * self.pitch)

    @property
    def cell_area(self):
        return self.pitch * self.pitch

    def meshgrid(self):
        return np.meshgrid(self.x, self.y)

    def index_to_world(self, index):
        ix, iy = index
        return (self.origin[0] + ix * self.pitch, self.origin[1] + iy * self.pitch)

    def world_to_index(self, point):
        """Nearest cell ``(ix, iy)`` for ``point``, or None when outside the grid."""
        px, py = point
        if not (math.isfinite(px) and math.isfinite(py)):
            raise InvalidInputError(f"non-finite coordinate {point!r}")
        ix = math.floor((px - self.origin[0]) / self.pitch + 0.5)
        iy = math.floor((py - self.origin[1]) / self.pitch + 0.5)
        if 0 <= ix < self.nx and 0 <= iy < self.ny:
            return (ix, iy)
        return None

    def coarsen(self, factor):
        """Grid whose cells are ``factor`` x ``factor`` blocks of this one."""
        factor = int(factor)
        nx, ny = self.nx // factor, self.ny // factor
        shift = (factor - 1) * self.pitch / 2
        return Grid2D(nx, ny, self.pitch * factor, (self.origin[0] + shift, self.origin[1] + shift))

    def to_dict(self):
        return {"nx": self.nx, "ny": self.ny, "pitch": self.pitch, "origin": list(self.origin)}


def world_to_index(grid: Grid2D, point):
    return grid.world_to_index(point)


def index_to_world(grid: Grid2D, index):
    return grid.index_to_world(index)


@dataclass(frozen=True)
class PotentialMap:
    """Energy landscape on a grid; ``values`` in joules."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)  # private copy, frozen below
        if values.shape != self.grid.shape:
            raise InvalidInputError(f"potential shape {values.shape} does not match grid {self.grid.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nanokelvin(self):
        return self.values / (K_B * 1e-9)

    def scaled(self, factor):
        return PotentialMap(self.grid, self.values * factor)

    def __add__(self, other):
        if other.grid != self.grid:
            raise InvalidInputError("cannot add potentials on different grids")
        return PotentialMap(self.grid, self.values + other.values)


@dataclass(frozen=True)
class DensityMap:
    """Mass per cell on a grid (atom counts or probability)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidInputError(f"density shape {values.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", values)

    @property
    def total(self):
        return float(self.values.sum())
