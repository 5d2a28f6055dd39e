import json
import math

import numpy as np
import pytest
from scipy import ndimage

from atomtronics.cli import main
from atomtronics.core import ConfigurationError
from atomtronics.io import encode_pgm
from atomtronics.optics import ImagingSystem
from atomtronics.scenario import (
    PRESETS,
    build_outline,
    dumbbell_outline,
    kiwi_outline,
    preset_config,
    ring_outline,
    validate_config,
)
from atomtronics.scenario.config import DEFAULTS

A = ImagingSystem().atom_plane_pixel()

SMALL_RUN = {
    "description": "short ballistic run for tests",
    "engine": "classical",
    "seed": 3,
    "trap": {"inplane_freq_hz": 0.0},
    "run": {"duration_s": 0.02, "dt_s": 1e-4, "snapshot_every_s": 0.004,
            "grid": {"extent_m": [300e-6, 300e-6], "pitch_m": 2e-6},
            "atoms": 2000, "source": {"kind": "gaussian", "center_m": [0.0, 0.0], "radius_m": 1e-6}},
    "analysis": [{"kind": "expansion_fit", "t_min_s": 0.004}],
}


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


# geometry

def test_dumbbell_defaults_connected_with_closed_wall():
    out = dumbbell_outline()
    assert out.n_interior_components == 1 and not out.flags
    walls = out.pattern.pixels > 0
    assert ndimage.label(walls)[1] == 1
    outside = ~(walls | out.interior)
    assert ndimage.label(outside)[1] == 1
    # the interior never touches the outside directly
    assert not np.any(ndimage.binary_dilation(out.interior) & outside)


def test_dumbbell_degenerate_limits():
    closed = dumbbell_outline(channel_width=0.0)
    assert closed.n_interior_components == 2
    assert {"closed_channel", "disjoint_interior"} <= set(closed.flags)
    merged = dumbbell_outline(channel_length=0.0)
    assert merged.n_interior_components == 1 and "merged_reservoirs" in merged.flags


def test_ring_channel_width():
    out = ring_outline()
    row = out.interior[383]
    right_half = row[640:]
    assert right_half.sum() * A == pytest.approx((76e-6 - 43e-6) / 2, abs=A)
    assert out.n_interior_components == 1


def test_ring_filled_limit():
    out = ring_outline(inner_d=0.0)
    assert "filled_disk" in out.flags
    assert out.interior[383:385, 639:641].all()


def test_ring_rotation_symmetry_on_square_device():
    out = ring_outline(shape=(200, 200))
    assert np.array_equal(out.pattern.pixels, np.rot90(out.pattern.pixels))


@pytest.mark.parametrize("factory", [dumbbell_outline, ring_outline, kiwi_outline])
def test_geometry_generators_are_pure(factory):
    a, b = factory(), factory()
    assert np.array_equal(a.pattern.pixels, b.pattern.pixels)
    assert np.array_equal(a.interior, b.interior)


def test_kiwi_scale():
    out = kiwi_outline()
    cols = np.flatnonzero(out.interior.any(axis=0))
    assert (cols[-1] - cols[0] + 1) * A == pytest.approx(150e-6, abs=3 * A)
    assert out.n_interior_components == 1


def test_outline_larger_than_field_rejected():
    with pytest.raises(ConfigurationError):
        ring_outline(inner_d=300e-6, outer_d=500e-6)


def test_build_outline_by_name():
    assert build_outline("ring", {"inner_d": 43e-6, "outer_d": 76e-6}).n_interior_components == 1
    assert build_outline("open_plane").interior.all()


# configuration

def test_minimal_config_gets_every_default():
    cfg, errors = validate_config('{"engine": "classical"}')
    assert errors == []
    for key, value in DEFAULTS.items():
        assert key in cfg.data
        if isinstance(value, dict):
            assert set(value) <= set(cfg[key])
    assert cfg["run"]["temperature_nK"] == 8.0


def test_snapshot_after_duration_is_named():
    cfg, errors = validate_config(json.dumps({"run": {"duration_s": 0.1, "snapshot_times_s": [0.05, 0.2]}}))
    assert cfg is None
    assert any("snapshot_times_s/1" in e for e in errors)


def test_unknown_engine_lists_allowed_values():
    _, errors = validate_config('{"engine": "quantum"}')
    assert len(errors) == 1
    assert "engine" in errors[0] and "classical" in errors[0] and "wave" in errors[0]


def test_every_violation_reported():
    _, errors = validate_config(json.dumps({"engine": "quantum", "seed": "x",
                                            "run": {"duration_s": -1}}))
    assert len(errors) >= 3


def test_invalid_json_reported():
    cfg, errors = validate_config("{not json")
    assert cfg is None and "JSON" in errors[0]


def test_config_hash_is_stable():
    a, _ = validate_config(json.dumps(SMALL_RUN))
    b, _ = validate_config(json.dumps(SMALL_RUN))
    assert a.hash == b.hash and len(a.hash) == 64


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name, tmp_path, capsys):
    assert main(["preset", name, "--out", str(tmp_path / "p.json")]) == 0
    cfg, errors = validate_config((tmp_path / "p.json").read_text())
    assert errors == [] and cfg is not None
    assert preset_config(name) == PRESETS[name]


# command line

def test_run_and_analyze_round_trip(tmp_path):
    path = _write(tmp_path, "small.json", SMALL_RUN)
    out = tmp_path / "run"
    assert main(["run", "--config", path, "--out", str(out)]) == 0
    for name in ("report.json", "normalized_config.json", "potential.csv", "snapshots.csv"):
        assert (out / name).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "ok" and report["seed"] == 3
    assert len(report["snapshots"]) == 6
    first = report["analysis"][0]["temperature_nK"]

    assert main(["analyze", "--out", str(out)]) == 0
    again = json.loads((out / "report.json").read_text())
    assert again["analysis"][0]["temperature_nK"] == first


def test_classical_run_is_bit_identical(tmp_path):
    path = _write(tmp_path, "small.json", SMALL_RUN)
    for name in ("a", "b"):
        assert main(["run", "--config", path, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    path = _write(tmp_path, "small.json", SMALL_RUN)
    assert main(["run", "--config", path, "--out", str(tmp_path / "r"), "--seed", "11"]) == 0
    assert json.loads((tmp_path / "r" / "report.json").read_text())["seed"] == 11
    stored = json.loads((tmp_path / "r" / "normalized_config.json").read_text())
    assert stored["seed"] == 11


def test_invalid_config_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "bad.json", {"engine": "quantum"})
    assert main(["run", "--config", path, "--out", str(tmp_path / "r")]) == 2
    assert "quantum" in capsys.readouterr().err


def test_simulation_error_leaves_failed_marker(tmp_path):
    cfg = json.loads(json.dumps(SMALL_RUN))
    cfg["engine"] = "wave"
    cfg["run"]["grid"] = {"extent_m": [40e-6, 40e-6], "pitch_m": 0.5e-6}  # coarser than lambda_dB/8
    cfg["analysis"] = []
    path = _write(tmp_path, "wave.json", cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "r")]) == 3
    assert (tmp_path / "r" / "FAILED").exists()
    assert json.loads((tmp_path / "r" / "report.json").read_text())["status"] == "failed"


def test_analysis_failure_exit_code(tmp_path):
    cfg = json.loads(json.dumps(SMALL_RUN))
    cfg["run"]["duration_s"] = 0.008
    cfg["analysis"] = [{"kind": "expansion_fit", "t_min_s": 0.006}]
    path = _write(tmp_path, "short.json", cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "r")]) == 4
    assert (tmp_path / "r" / "FAILED").exists()


def test_pattern_file_source(tmp_path):
    pixels = np.zeros((768, 1280), dtype=np.uint8)
    pixels[300:468, 500:780] = 255
    (tmp_path / "box.pgm").write_bytes(encode_pgm(pixels))
    cfg = json.loads(json.dumps(SMALL_RUN))
    cfg["pattern_source"] = {"file": "box.pgm"}
    cfg["run"].update(duration_s=0.002, dt_s=1e-5, snapshot_every_s=0.001,
                      grid={"extent_m": [150e-6, 150e-6], "pitch_m": 0.25e-6})
    cfg["analysis"] = []
    path = _write(tmp_path, "file.json", cfg)
    assert main(["run", "--config", path, "--out", str(tmp_path / "r")]) == 0
    stored = json.loads((tmp_path / "r" / "normalized_config.json").read_text())
    assert stored["pattern_source"]["file"] == str(tmp_path / "box.pgm")


def test_project_and_trap_commands(tmp_path, capsys):
    assert main(["project", "--out", str(tmp_path / "p"), "--extent", "40e-6", "40e-6"]) == 0
    assert (tmp_path / "p" / "potential.csv").exists()
    assert main(["trap", "--out", str(tmp_path / "t")]) == 0
    rep = json.loads((tmp_path / "t" / "trap_report.json").read_text())
    assert rep["vertical_frequency_analytic_hz"] == pytest.approx(810.0, rel=2e-3)
    assert math.isfinite(rep["dimensionality_ratio"])
