import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atomtronics.core import K_B, DensityMap, FormatError, Grid2D, PotentialMap
from atomtronics.io import (
    encode_pgm,
    parse_pgm,
    read_density_csv,
    read_potential_csv,
    read_trace_csv,
    write_density_csv,
    write_potential_csv,
    write_trace_csv,
)


@settings(max_examples=50)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_round_trip(pixels):
    assert np.array_equal(parse_pgm(encode_pgm(pixels)), pixels)


def test_pgm_header_with_comment():
    payload = b"P5\n# made by hand\n3 2\n255\n" + bytes(range(6))
    assert parse_pgm(payload).tolist() == [[0, 1, 2], [3, 4, 5]]


@pytest.mark.parametrize("payload", [
    b"P2\n2 2\n255\n0 0 0 0",
    b"P5\n2 2\n65535\n" + bytes(8),
    b"P5\n4 4\n255\n" + bytes(10),
    b"",
])
def test_pgm_rejects_bad_payloads(payload):
    with pytest.raises(FormatError):
        parse_pgm(payload)


def test_encode_rejects_out_of_range():
    with pytest.raises(FormatError):
        encode_pgm(np.array([[300.0]]))


def test_potential_csv_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    g = Grid2D(7, 5, 0.37e-6, (-1.1e-6, 2.3e-6))
    u = PotentialMap(g, rng.random(g.shape) * 2.5e-6 * K_B)
    write_potential_csv(tmp_path / "u.csv", u)
    back = read_potential_csv(tmp_path / "u.csv")
    assert back.grid == g
    np.testing.assert_allclose(back.values, u.values, rtol=1e-15, atol=0)


def test_density_csv_round_trip(tmp_path):
    g = Grid2D(3, 4, 1e-6)
    d = DensityMap(g, np.arange(12.0).reshape(4, 3))
    write_density_csv(tmp_path / "d.csv", d)
    back = read_density_csv(tmp_path / "d.csv")
    assert np.array_equal(back.values, d.values)


def test_potential_csv_requires_pitch(tmp_path):
    (tmp_path / "bad.csv").write_text("1,2\n3,4\n")
    with pytest.raises(FormatError):
        read_potential_csv(tmp_path / "bad.csv")


def test_trace_csv_single_and_multi_column(tmp_path):
    t = np.linspace(0, 1, 5)
    write_trace_csv(tmp_path / "a.csv", t, np.sqrt(t))
    tt, v = read_trace_csv(tmp_path / "a.csv")
    assert np.array_equal(tt, t) and np.array_equal(v, np.sqrt(t))

    cols = np.column_stack([t, 2 * t])
    write_trace_csv(tmp_path / "b.csv", t, cols, ("t_s", "a", "b"))
    _, v = read_trace_csv(tmp_path / "b.csv")
    assert v.shape == (5, 2) and np.array_equal(v, cols)

    with pytest.raises(FormatError):
        write_trace_csv(tmp_path / "c.csv", t, cols, ("t_s", "a"))
