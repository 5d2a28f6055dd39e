"""Density maps extracted from either dynamical representation."""

from __future__ import annotations

import numpy as np

from ..core import DensityMap, Grid2D, InvalidInputError
from .classical import AtomEnsemble
from .wave import Wavefunction


def _block_factor(fine: Grid2D, coarse: Grid2D):
    factor = coarse.pitch / fine.pitch
    f = int(round(factor))
    if f < 1 or abs(factor - f) > 1e-9 * f or coarse != fine.coarsen(f):
        raise InvalidInputError("density grid must equal the wave grid or a block coarsening of it")
    return f


def density(state, grid: Grid2D) -> DensityMap:
    """Histogram of alive atoms, or ``|psi|^2 * pitch^2`` block-summed onto ``grid``."""
    if isinstance(state, AtomEnsemble):
        pos = state.positions[state.alive]
        x_edges = grid.origin[0] - grid.pitch / 2 + grid.pitch * np.arange(grid.nx + 1)
        y_edges = grid.origin[1] - grid.pitch / 2 + grid.pitch * np.arange(grid.ny + 1)
        hist, _, _ = np.histogram2d(pos[:, 1], pos[:, 0], bins=(y_edges, x_edges))
        return DensityMap(grid, hist)
    if isinstance(state, Wavefunction):
        prob = np.abs(state.amplitudes) ** 2 * state.grid.cell_area
        if grid == state.grid:
            return DensityMap(grid, prob)
        f = _block_factor(state.grid, grid)
        trimmed = prob[: grid.ny * f, : grid.nx * f]
        return DensityMap(grid, trimmed.reshape(grid.ny, f, grid.nx, f).sum(axis=(1, 3)))
    raise InvalidInputError(f"cannot take the density of {type(state).__name__}")
