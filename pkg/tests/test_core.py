import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomtronics.core import (
    CONSTANTS,
    H_PLANCK,
    K_B,
    M_RB87,
    DensityMap,
    EnergyValue,
    Grid2D,
    InvalidInputError,
    PotentialMap,
    as_joules,
    convert_energy,
    index_to_world,
    world_to_index,
)


def test_constants_positive_and_frozen():
    for name in ("k_B", "hbar", "mass_rb87", "g_gravity", "wavelength_pattern", "wavelength_trap"):
        assert getattr(CONSTANTS, name) > 0
    assert CONSTANTS.mass_rb87 == pytest.approx(1.44316e-25, rel=1e-5)
    with pytest.raises(AttributeError):
        CONSTANTS.k_B = 1.0


def test_microkelvin_to_joule():
    e = convert_energy(EnergyValue.from_microkelvin(1.0), "joule")
    assert e.value == pytest.approx(1.380649e-29, rel=1e-12)


def test_h_times_810hz_in_nanokelvin():
    e = convert_energy(EnergyValue(810.0, "hertz_times_h"), "kB_nanokelvin")
    # h * 810 / k_B by hand: 6.62607015e-34 * 810 / 1.380649e-23 = 38.873 nK
    assert e.value == pytest.approx(38.873, abs=5e-3)


@pytest.mark.parametrize("src", ["joule", "kB_nanokelvin", "hertz_times_h"])
@pytest.mark.parametrize("dst", ["joule", "kB_nanokelvin", "hertz_times_h"])
def test_zero_converts_to_zero(src, dst):
    assert convert_energy(EnergyValue(0.0, src), dst).value == 0.0


def test_unknown_unit_rejected():
    with pytest.raises(InvalidInputError):
        convert_energy(EnergyValue(1.0, "joule"), "erg")
    with pytest.raises(InvalidInputError):
        EnergyValue(1.0, "furlong")


@settings(max_examples=200)
@given(st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-250), st.sampled_from(["joule", "kB_nanokelvin", "hertz_times_h"]),
       st.sampled_from(["joule", "kB_nanokelvin", "hertz_times_h"]))
def test_conversion_round_trip(value, src, dst):
    x = EnergyValue(value, src)
    back = convert_energy(convert_energy(x, dst), src)
    assert back.value == pytest.approx(value, rel=1e-12, abs=1e-300)


def test_as_joules_accepts_floats_and_values():
    assert as_joules(2.0) == 2.0
    assert as_joules(EnergyValue.from_nanokelvin(1.0)) == pytest.approx(K_B * 1e-9)


def test_world_to_index_examples():
    g = Grid2D(10, 8, 0.5e-6, (1e-6, -2e-6))
    assert world_to_index(g, g.origin) == (0, 0)
    assert world_to_index(g, (g.origin[0] + g.pitch, g.origin[1])) == (1, 0)
    assert world_to_index(g, (1.0, 0.0)) is None
    assert world_to_index(g, (g.origin[0] - g.pitch, g.origin[1])) is None


def test_world_to_index_rejects_non_finite():
    g = Grid2D(4, 4, 1.0)
    with pytest.raises(InvalidInputError):
        world_to_index(g, (math.nan, 0.0))
    with pytest.raises(InvalidInputError):
        world_to_index(g, (0.0, math.inf))


@settings(max_examples=30)
@given(st.integers(1, 12), st.integers(1, 12), st.floats(1e-7, 1e-3), st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_index_world_bijection_exhaustive(nx, ny, pitch, ox, oy):
    g = Grid2D(nx, ny, pitch, (ox, oy))
    for ix in range(nx):
        for iy in range(ny):
            assert world_to_index(g, index_to_world(g, (ix, iy))) == (ix, iy)


def test_grid_validation():
    with pytest.raises(InvalidInputError):
        Grid2D(0, 3, 1.0)
    with pytest.raises(InvalidInputError):
        Grid2D(3, 3, -1.0)


def test_centered_grid_is_symmetric():
    g = Grid2D.centered(10e-6, 6e-6, 1e-6)
    assert g.shape == (6, 10)
    assert g.x[0] == pytest.approx(-g.x[-1])
    assert g.y[0] == pytest.approx(-g.y[-1])


def test_coarsen_block_centres():
    g = Grid2D.centered(8e-6, 8e-6, 1e-6)
    c = g.coarsen(2)
    assert c.shape == (4, 4)
    assert c.x[0] == pytest.approx(g.x[:2].mean())


def test_potential_map_is_read_only_and_adds():
    g = Grid2D(3, 2, 1.0)
    a = PotentialMap(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        a.values[0, 0] = 2.0
    b = a + a.scaled(2.0)
    assert np.all(b.values == 3.0)
    with pytest.raises(InvalidInputError):
        PotentialMap(g, np.ones((3, 3)))


def test_density_total():
    g = Grid2D(3, 2, 1.0)
    assert DensityMap(g, np.full(g.shape, 0.5)).total == pytest.approx(3.0)


def test_planck_constant_consistent():
    assert H_PLANCK == pytest.approx(2 * math.pi * CONSTANTS.hbar, rel=1e-15)
    assert M_RB87 == CONSTANTS.mass_rb87
