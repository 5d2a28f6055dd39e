"""File formats: binary P5 graymaps, CSV maps and CSV traces."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .core import K_B, DensityMap, FormatError, Grid2D, PotentialMap

_PGM_HEADER = re.compile(rb"\A(P5)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")

NK = K_B * 1e-9


def parse_pgm(payload: bytes) -> np.ndarray:
    """Decode an 8-bit binary graymap into a ``(rows, cols)`` uint8 array."""
    match = _PGM_HEADER.match(payload)
    if match is None:
        raise FormatError("not a binary P5 graymap (bad magic or header)")
    width, height, maxval = (int(g) for g in match.groups()[1:])
    if maxval != 255:
        raise FormatError(f"only 8-bit graymaps are supported (maxval 255), got maxval {maxval}")
    if width < 1 or height < 1:
        raise FormatError(f"invalid graymap dimensions {width}x{height}")
    body = payload[match.end():]
    if len(body) < width * height:
        raise FormatError(f"truncated graymap: expected {width * height} bytes, got {len(body)}")
    return np.frombuffer(body[: width * height], dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(pixels) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise FormatError("graymap needs a 2D array")
    if pixels.dtype != np.uint8:
        if pixels.min() < 0 or pixels.max() > 255:
            raise FormatError("graymap levels must lie in [0, 255]")
        pixels = np.round(pixels).astype(np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(pixels).tobytes()


def write_pgm(path, pixels):
    Path(path).write_bytes(encode_pgm(pixels))


def quicklook_pgm(path, values, vmax=None):
    """Write ``values`` scaled to 0..255 (``vmax`` maps to white)."""
    values = np.asarray(values, dtype=float)
    if vmax is None:
        vmax = values.max()
    scaled = np.zeros_like(values) if vmax <= 0 else np.clip(values / vmax, 0.0, 1.0) * 255
    write_pgm(path, np.round(scaled).astype(np.uint8))


def _write_map_csv(path, grid, values, unit):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# pitch_m={grid.pitch!r}\n")
        fh.write(f"# unit={unit}\n")
        fh.write(f"# origin_m={grid.origin[0]!r},{grid.origin[1]!r}\n")
        fh.write(f"# shape={grid.ny},{grid.nx}\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _read_map_csv(path):
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif line.strip():
                rows.append([float(v) for v in line.split(",")])
    if "pitch_m" not in meta:
        raise FormatError(f"{path}: missing '# pitch_m=' header")
    values = np.array(rows, dtype=float)
    pitch = float(meta["pitch_m"])
    if "origin_m" in meta:
        ox, oy = (float(v) for v in meta["origin_m"].split(","))
    else:
        ny, nx = values.shape
        ox, oy = -(nx - 1) * pitch / 2, -(ny - 1) * pitch / 2
    grid = Grid2D(values.shape[1], values.shape[0], pitch, (ox, oy))
    return grid, values, meta.get("unit", "")


def write_potential_csv(path, potential: PotentialMap):
    """Row-major potential in k_B nK; repr() keeps the values bit-exact."""
    _write_map_csv(path, potential.grid, potential.values / NK, "kB_nK")


def read_potential_csv(path) -> PotentialMap:
    grid, values, unit = _read_map_csv(path)
    if unit != "kB_nK":
        raise FormatError(f"{path}: expected unit=kB_nK, got {unit!r}")
    return PotentialMap(grid, values * NK)


def write_density_csv(path, density: DensityMap):
    _write_map_csv(path, density.grid, density.values, "count")


def read_density_csv(path) -> DensityMap:
    grid, values, _ = _read_map_csv(path)
    return DensityMap(grid, values)


def write_trace_csv(path, t, values, header=("t_s", "value")):
    """Time series as CSV; ``values`` may hold several columns."""
    table = np.column_stack([np.asarray(t, dtype=float), np.asarray(values, dtype=float)])
    if table.shape[1] != len(header):
        raise FormatError(f"{len(header)} column names for {table.shape[1]} columns")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_trace_csv(path):
    """``(t, values)``; ``values`` is 1D for a single data column."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = data[:, 1] if data.shape[1] == 2 else data[:, 1:]
    return data[:, 0], values
