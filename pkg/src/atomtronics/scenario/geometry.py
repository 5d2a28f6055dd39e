"""Outline patterns for the modulator: dumbbell, ring, kiwi, open plane and gratings.

Shapes are described in atom-plane metres, centred on the optical axis, and
rasterised at the centres of the demagnified SLM pixels.  The wall is the
band of pixels within ``wall_thickness`` of the interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..core import ConfigurationError, InvalidInputError
from ..optics import DEVICE_PIXEL_PITCH, DEVICE_SHAPE, ImagingSystem, SlmPattern, grating_pattern

DEFAULT_WALL = 4e-6


@dataclass(frozen=True)
class Outline:
    pattern: SlmPattern
    interior: np.ndarray  # bool, SLM pixels the atoms may occupy
    flags: tuple = ()

    @property
    def n_interior_components(self):
        return int(ndimage.label(self.interior)[1])


def slm_coordinates(imaging: ImagingSystem, shape=DEVICE_SHAPE, pixel_pitch=DEVICE_PIXEL_PITCH):
    """Atom-plane coordinates (x, y) of every SLM pixel centre."""
    a = imaging.atom_plane_pixel(pixel_pitch)
    ny, nx = shape
    x = (np.arange(nx) - (nx - 1) / 2) * a
    y = (np.arange(ny) - (ny - 1) / 2) * a
    return np.meshgrid(x, y)


def _outline(interior, wall_thickness, imaging, shape, pixel_pitch, flags=()):
    if not wall_thickness > 0:
        raise InvalidInputError("wall thickness must be positive")
    a = imaging.atom_plane_pixel(pixel_pitch)
    dist = ndimage.distance_transform_edt(~interior) * a
    walls = (~interior) & (dist <= wall_thickness)
    x, y = slm_coordinates(imaging, shape, pixel_pitch)
    fx, fy = imaging.field_extent
    lit = walls | interior
    if np.any(lit & ((np.abs(x) > fx / 2) | (np.abs(y) > fy / 2))):
        raise ConfigurationError("outline does not fit inside the imaging field")
    pixels = np.where(walls, 255, 0).astype(np.uint8)
    outline = Outline(SlmPattern(pixels, pixel_pitch), interior, tuple(flags))
    if outline.n_interior_components > 1:
        outline = Outline(outline.pattern, interior, outline.flags + ("disjoint_interior",))
    return outline


def dumbbell_outline(reservoir_radius=35e-6, channel_length=35e-6, channel_width=30e-6,
                     wall_thickness=DEFAULT_WALL, imaging=None, shape=DEVICE_SHAPE,
                     pixel_pitch=DEVICE_PIXEL_PITCH) -> Outline:
    """Two round reservoirs joined along x by a straight channel.

    ``channel_length`` is the gap between the reservoir rims.  A zero
    width closes the channel; a zero length lets the reservoirs touch.
    """
    imaging = imaging or ImagingSystem()
    if not reservoir_radius > 0 or channel_length < 0 or channel_width < 0:
        raise InvalidInputError("reservoir radius must be positive and channel sizes non-negative")
    x, y = slm_coordinates(imaging, shape, pixel_pitch)
    cx = channel_length / 2 + reservoir_radius
    interior = ((x - cx) ** 2 + y**2 <= reservoir_radius**2) | ((x + cx) ** 2 + y**2 <= reservoir_radius**2)
    flags = []
    if channel_width > 0:
        interior |= (np.abs(x) <= cx) & (np.abs(y) <= channel_width / 2)
    else:
        flags.append("closed_channel")
    if channel_length == 0:
        flags.append("merged_reservoirs")
    return _outline(interior, wall_thickness, imaging, shape, pixel_pitch, flags)


def ring_outline(inner_d=43e-6, outer_d=76e-6, wall_thickness=DEFAULT_WALL, imaging=None,
                 shape=DEVICE_SHAPE, pixel_pitch=DEVICE_PIXEL_PITCH) -> Outline:
    """Annular channel between diameters ``inner_d`` and ``outer_d``."""
    imaging = imaging or ImagingSystem()
    if not outer_d > 0 or inner_d < 0 or not outer_d > inner_d:
        raise InvalidInputError(f"need outer_d > inner_d >= 0, got {outer_d} and {inner_d}")
    x, y = slm_coordinates(imaging, shape, pixel_pitch)
    r2 = x**2 + y**2
    interior = (r2 <= (outer_d / 2) ** 2) & (r2 >= (inner_d / 2) ** 2)
    flags = ("filled_disk",) if inner_d == 0 else ()
    return _outline(interior, wall_thickness, imaging, shape, pixel_pitch, flags)


def kiwi_outline(length=150e-6, wall_thickness=DEFAULT_WALL, imaging=None, shape=DEVICE_SHAPE,
                 pixel_pitch=DEVICE_PIXEL_PITCH) -> Outline:
    """Stylised kiwi bird, ``length`` from beak tip to tail, facing +x.

    Built from an egg-shaped body, a round head and a tapering beak, with
    two short legs below the body.
    """
    imaging = imaging or ImagingSystem()
    if not length > 0:
        raise InvalidInputError("kiwi length must be positive")
    x, y = slm_coordinates(imaging, shape, pixel_pitch)
    s = length / 150e-6
    # coordinates in "design micrometres" for a 150 um bird, tail at -75
    u, v = x / (1e-6 * s), y / (1e-6 * s)
    body = ((u + 27) / 48) ** 2 + (v / (30 + 4 * np.tanh((u + 27) / 20))) ** 2 <= 1
    head = (u - 22) ** 2 + (v - 14) ** 2 <= 13**2
    neck = (u >= 5) & (u <= 22) & (v >= -2) & (v <= 20)
    taper = (u >= 30) & (u <= 75)
    beak = taper & (np.abs(v - 14 + 0.22 * (u - 30)) <= 3.5 - 2.5 * (u - 30) / 45)
    legs = ((np.abs(u + 35) <= 2.5) | (np.abs(u + 15) <= 2.5)) & (v <= -20) & (v >= -42)
    interior = body | head | neck | beak | legs
    return _outline(interior, wall_thickness, imaging, shape, pixel_pitch)


def open_plane(shape=DEVICE_SHAPE, pixel_pitch=DEVICE_PIXEL_PITCH) -> Outline:
    """All-dark frame: no painted walls."""
    dark = np.zeros(shape, dtype=np.uint8)
    return Outline(SlmPattern(dark, pixel_pitch), np.ones(shape, dtype=bool))


def grating_outline(pitch_px=10, phase_px=0, shape=DEVICE_SHAPE, pixel_pitch=DEVICE_PIXEL_PITCH) -> Outline:
    pattern = grating_pattern(pitch_px, phase_px, shape, pixel_pitch)
    return Outline(pattern, pattern.pixels == 0)


PRESETS = {
    "dumbbell": dumbbell_outline,
    "ring": ring_outline,
    "kiwi": kiwi_outline,
    "open_plane": open_plane,
    "grating": grating_outline,
}


def build_outline(name, params=None, imaging=None) -> Outline:
    """Outline for a named preset with keyword ``params``."""
    if name not in PRESETS:
        raise InvalidInputError(f"unknown geometry preset {name!r}; expected one of {sorted(PRESETS)}")
    params = dict(params or {})
    if name in ("dumbbell", "ring", "kiwi"):
        params["imaging"] = imaging
    return PRESETS[name](**params)
