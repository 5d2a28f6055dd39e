"""Scenario configuration: JSON schema, default injection and semantic checks."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field

import jsonschema

ENGINES = ("classical", "wave", "none")
ANALYSIS_KINDS = ("expansion_fit", "imbalance", "two_regime", "region_fraction",
                  "fringe_stability", "mtf_psf")

DEFAULTS = {
    "description": "",
    "engine": "classical",
    "seed": 0,
    "trap": {
        "fringe_spacing_m": 8e-6,
        "depth_uK": 0.878,
        "escape_depth_uK": 2.0,
        "inplane_freq_hz": 1.0,
        "rayleigh_range_m": 1.6e-3,
        "inplane_envelope_depth_nK": None,
    },
    "imaging": {
        "magnification": 0.036,
        "psf_model": "gaussian",
        "psf_fwhm_m": 0.9e-6,
        "max_depth_uK": 2.5,
        "field_extent_m": [600e-6, 400e-6],
    },
    "pattern_source": {"preset": "open_plane", "params": {}},
    "co2": {"depth_nK": 100.0, "waist_m": 30e-6},
    "ramp": {"mode": "default", "time_offset_s": 1.12, "pattern_during_loading": 0.0,
             "segments": None, "powers": None},
    "run": {
        "duration_s": 0.1,
        "dt_s": 1e-4,
        "snapshot_every_s": 0.004,
        "snapshot_times_s": None,
        "grid": {"extent_m": [600e-6, 400e-6], "pitch_m": 0.25e-6},
        "snapshot_pitch_m": None,
        "temperature_nK": 8.0,
        "atoms": 10000,
        "source": {"kind": "gaussian", "center_m": [0.0, 0.0], "radius_m": 1e-6},
        "escape_energy_uK": None,
        "potential_cap_nK": None,
        "absorber": False,
        "interaction_g": 0.0,
    },
    "analysis": [],
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_pos_pair = {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2}

_region = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["halfplane", "disk", "rect", "annulus", "interior"]},
        "side": {"enum": ["left", "right", "below", "above"]},
        "x0": _num, "y0": _num, "center": _pair, "radius": _pos, "size": _pos_pair,
        "r_inner": _nonneg, "r_outer": _pos, "invert": {"type": "boolean"},
        "within": {"$ref": "#/$defs/region"},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"region": _region},
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "engine": {"enum": list(ENGINES)},
        "seed": {"type": "integer", "minimum": 0},
        "trap": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "fringe_spacing_m": _pos, "depth_uK": _nonneg, "escape_depth_uK": _nonneg,
                "inplane_freq_hz": _nonneg, "rayleigh_range_m": _pos,
                "inplane_envelope_depth_nK": _opt_pos,
            },
        },
        "imaging": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "magnification": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "psf_model": {"enum": ["gaussian", "airy"]},
                "psf_fwhm_m": _pos, "max_depth_uK": _nonneg, "field_extent_m": _pos_pair,
            },
        },
        "pattern_source": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["dumbbell", "ring", "kiwi", "open_plane", "grating"]},
                "params": {"type": "object"},
                "file": {"type": "string"},
            },
        },
        "co2": {
            "type": "object", "additionalProperties": False,
            "properties": {"depth_nK": _nonneg, "waist_m": _pos},
        },
        "ramp": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["default", "segments", "static"]},
                "time_offset_s": _nonneg,
                "pattern_during_loading": {"type": "number", "minimum": 0, "maximum": 1},
                "segments": {"type": ["object", "null"]},
                "powers": {"type": ["object", "null"],
                           "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
            },
        },
        "run": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "duration_s": _pos, "dt_s": _pos,
                "snapshot_every_s": _opt_pos,
                "snapshot_times_s": {"type": ["array", "null"], "items": _nonneg},
                "grid": {"type": "object", "additionalProperties": False, "required": ["extent_m", "pitch_m"],
                         "properties": {"extent_m": _pos_pair, "pitch_m": _pos}},
                "snapshot_pitch_m": _opt_pos,
                "temperature_nK": _nonneg,
                "atoms": {"type": "integer", "minimum": 1},
                "source": {
                    "type": "object", "required": ["kind"], "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["gaussian", "region"]},
                        "center_m": _pair, "radius_m": _pos,
                        "region": {"$ref": "#/$defs/region"}, "smoothing_m": _nonneg,
                    },
                },
                "escape_energy_uK": _opt_pos,
                "potential_cap_nK": _opt_pos,
                "absorber": {"type": "boolean"},
                "interaction_g": _num,
            },
        },
        "analysis": {
            "type": "array",
            "items": {
                "type": "object", "required": ["kind"],
                "properties": {"kind": {"enum": list(ANALYSIS_KINDS)}},
            },
        },
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, default-complete configuration (plain JSON data)."""

    data: dict
    base_dir: str = "."
    warnings: tuple = field(default_factory=tuple)

    def __getitem__(self, key):
        return self.data[key]

    def canonical_json(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def resolve_path(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)


class ConfigInvalid(Exception):
    """Raised by :func:`load_config` with the full list of violations."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def merge_defaults(raw, defaults=DEFAULTS):
    """Recursively fill missing keys of ``raw`` from ``defaults``."""
    if not isinstance(raw, dict) or not isinstance(defaults, dict):
        return copy.deepcopy(raw)
    out = copy.deepcopy(defaults)
    for key, value in raw.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict) and key not in ("params",):
            out[key] = merge_defaults(value, out[key])
        else:
            out[key] = copy.deepcopy(value)
    return out


def _path(error):
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def _schema_errors(data):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        if err.validator == "enum":
            errors.append(f"{_path(err)}: {err.instance!r} is not allowed; expected one of {err.validator_value}")
        else:
            errors.append(f"{_path(err)}: {err.message}")
    return errors


def _semantic_errors(cfg, base_dir):
    errors = []
    run = cfg.get("run", {})
    duration = run.get("duration_s")
    dt = run.get("dt_s")
    times = run.get("snapshot_times_s")
    if isinstance(duration, (int, float)):
        for i, t in enumerate(times or []):
            if isinstance(t, (int, float)) and t > duration:
                errors.append(f"run/snapshot_times_s/{i}: snapshot time {t} s exceeds duration {duration} s")
        every = run.get("snapshot_every_s")
        if times is None and isinstance(every, (int, float)) and every > duration:
            errors.append(f"run/snapshot_every_s: interval {every} s exceeds duration {duration} s")
        if isinstance(dt, (int, float)) and dt > duration:
            errors.append(f"run/dt_s: time step {dt} s exceeds duration {duration} s")
    if times is not None and run.get("snapshot_every_s") is not None:
        errors.append("run: give either snapshot_times_s or snapshot_every_s, not both")

    src = cfg.get("pattern_source", {})
    if isinstance(src, dict):
        if "file" in src and "preset" in src:
            errors.append("pattern_source: give either file or preset, not both")
        path = src.get("file")
        if isinstance(path, str):
            full = path if os.path.isabs(path) else os.path.join(base_dir, path)
            if not os.path.isfile(full):
                errors.append(f"pattern_source/file: {path!r} does not exist")

    ramp = cfg.get("ramp", {})
    if isinstance(ramp, dict):
        if ramp.get("mode") == "segments" and not ramp.get("segments"):
            errors.append("ramp/segments: required when mode is 'segments'")
        if ramp.get("mode") == "static" and ramp.get("powers") is None:
            errors.append("ramp/powers: required when mode is 'static'")

    engine = cfg.get("engine")
    kinds = [a.get("kind") for a in cfg.get("analysis", []) if isinstance(a, dict)]
    needs_snapshots = {"expansion_fit", "imbalance", "region_fraction"}
    if engine == "none":
        for k in kinds:
            if k in needs_snapshots:
                errors.append(f"analysis: {k!r} needs a simulation engine, but engine is 'none'")
    for i, a in enumerate(cfg.get("analysis", [])):
        if not isinstance(a, dict):
            continue
        if a.get("kind") == "imbalance" and not ("mask_initial" in a and "mask_final" in a):
            errors.append(f"analysis/{i}: imbalance needs mask_initial and mask_final")
        if a.get("kind") == "two_regime" and "imbalance" not in kinds[:i]:
            errors.append(f"analysis/{i}: two_regime must follow an imbalance directive")
        if a.get("kind") == "region_fraction" and not isinstance(a.get("regions"), dict):
            errors.append(f"analysis/{i}: region_fraction needs a 'regions' mapping")
    grid = run.get("grid", {})
    sp = run.get("snapshot_pitch_m")
    if engine == "wave" and isinstance(sp, (int, float)) and isinstance(grid, dict):
        pitch = grid.get("pitch_m")
        if isinstance(pitch, (int, float)) and pitch > 0:
            ratio = sp / pitch
            if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
                errors.append("run/snapshot_pitch_m: must be an integer multiple of the wave grid pitch")
    return errors


def validate_config(raw_text, base_dir="."):
    """Parse and validate a JSON scenario document.

    Returns ``(config, errors)``: a :class:`ScenarioConfig` with every
    default materialised and an empty list, or ``None`` and the complete
    list of violations.
    """
    try:
        raw = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        return None, [f"<root>: not valid JSON ({exc.msg} at line {exc.lineno})"]
    if not isinstance(raw, dict):
        return None, ["<root>: configuration must be a JSON object"]
    merged = merge_defaults(raw)
    src = raw.get("pattern_source")
    if isinstance(src, dict) and "file" in src:
        merged["pattern_source"] = copy.deepcopy(src)
    run = raw.get("run")
    if isinstance(run, dict) and run.get("snapshot_times_s") is not None and "snapshot_every_s" not in run:
        merged["run"]["snapshot_every_s"] = None
    errors = _schema_errors(merged)
    errors += _semantic_errors(merged, base_dir)
    if errors:
        return None, errors
    return ScenarioConfig(merged, base_dir), []


def load_config(path, seed=None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    cfg, errors = validate_config(text, os.path.dirname(os.path.abspath(path)))
    if errors:
        raise ConfigInvalid(errors)
    src = cfg.data["pattern_source"]
    if "file" in src:
        # absolute path so the stored config stays usable from the run directory
        src["file"] = os.path.abspath(cfg.resolve_path(src["file"]))
    if seed is not None:
        data = dict(cfg.data)
        data["seed"] = int(seed)
        cfg = ScenarioConfig(data, cfg.base_dir)
    return cfg
