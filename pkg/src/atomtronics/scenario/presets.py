"""Ready-to-run scenario documents."""

from __future__ import annotations

import copy

RING_CHANNEL_CENTER = (43e-6 + 76e-6) / 4  # mid-channel radius, m

PRESETS = {
    "expansion": {
        "description": "Ballistic expansion of an 8 nK cloud released into a flat plane; "
                       "time-of-flight thermometry from the radius growth.",
        "engine": "classical",
        "seed": 0,
        "trap": {"inplane_freq_hz": 0.0},
        "pattern_source": {"preset": "open_plane", "params": {}},
        "run": {
            "duration_s": 0.1, "dt_s": 1e-4, "snapshot_every_s": 0.004,
            "grid": {"extent_m": [800e-6, 800e-6], "pitch_m": 2e-6},
            "temperature_nK": 8.0, "atoms": 10000,
            "source": {"kind": "gaussian", "center_m": [0.0, 0.0], "radius_m": 1e-6},
        },
        "analysis": [{"kind": "expansion_fit", "t_min_s": 0.008}],
    },
    "dumbbell": {
        "description": "Thermal matter wave released from the left reservoir of a painted "
                       "dumbbell; reservoir imbalance and two-regime transport fit.",
        "engine": "wave",
        "seed": 0,
        "pattern_source": {"preset": "dumbbell",
                           "params": {"reservoir_radius": 35e-6, "channel_length": 35e-6,
                                      "channel_width": 30e-6}},
        "run": {
            "duration_s": 0.3, "dt_s": 0.005 / 278, "snapshot_every_s": 0.005,
            "grid": {"extent_m": [192e-6, 84e-6], "pitch_m": 0.25e-6},
            "snapshot_pitch_m": 1e-6,
            "temperature_nK": 8.0,
            "source": {"kind": "region", "smoothing_m": 2e-6,
                       "region": {"kind": "interior",
                                  "within": {"kind": "halfplane", "side": "left", "x0": 0.0}}},
            "potential_cap_nK": 40.0,
            "absorber": False,
        },
        "analysis": [
            {"kind": "imbalance",
             "mask_initial": {"kind": "halfplane", "side": "left", "x0": 0.0},
             "mask_final": {"kind": "halfplane", "side": "right", "x0": 0.0},
             "early_window_s": 0.04},
            {"kind": "two_regime"},
        ],
    },
    "ring": {
        "description": "Classical atoms seeded on the left side of a painted ring fill the "
                       "annular channel.",
        "engine": "classical",
        "seed": 0,
        "pattern_source": {"preset": "ring", "params": {"inner_d": 43e-6, "outer_d": 76e-6}},
        "run": {
            "duration_s": 0.1, "dt_s": 1e-5, "snapshot_every_s": 0.01,
            "grid": {"extent_m": [96e-6, 96e-6], "pitch_m": 0.25e-6},
            "temperature_nK": 8.0, "atoms": 10000,
            "source": {"kind": "gaussian", "center_m": [-RING_CHANNEL_CENTER, 0.0], "radius_m": 1e-6},
        },
        "analysis": [
            {"kind": "region_fraction",
             "regions": {
                 "right_half": {"kind": "halfplane", "side": "right", "x0": 0.0},
                 "outside_walls": {"kind": "annulus", "r_inner": 43e-6 / 2 - 4e-6,
                                   "r_outer": 76e-6 / 2 + 4e-6, "invert": True},
             }},
        ],
    },
    "kiwi": {
        "description": "Classical atoms released inside a 150 um kiwi-shaped outline.",
        "engine": "classical",
        "seed": 0,
        "pattern_source": {"preset": "kiwi", "params": {"length": 150e-6}},
        "run": {
            "duration_s": 0.1, "dt_s": 1e-5, "snapshot_every_s": 0.01,
            "grid": {"extent_m": [180e-6, 120e-6], "pitch_m": 0.25e-6},
            "temperature_nK": 8.0, "atoms": 5000,
            "source": {"kind": "gaussian", "center_m": [-27e-6, 0.0], "radius_m": 2e-6},
        },
        "analysis": [
            {"kind": "region_fraction",
             "regions": {"inside_outline": {"kind": "interior"}}},
        ],
    },
    "mtf": {
        "description": "Grating contrast at 7.2, 3.6, 2.16, 1.44 and 0.72 um through a 0.9 um "
                       "gaussian PSF; PSF recovered from the contrast curve.",
        "engine": "none",
        "seed": 0,
        "imaging": {"psf_model": "gaussian", "psf_fwhm_m": 0.9e-6},
        "analysis": [
            {"kind": "mtf_psf", "target_pitch_m": 0.09e-6,
             "periods_m": [7.2e-6, 3.6e-6, 2.16e-6, 1.44e-6, 0.72e-6]},
        ],
    },
    "fringe-stability": {
        "description": "One hour of fringe images every 60 s with a 15 degree linear drift; "
                       "phase tracking with unwrapping.",
        "engine": "none",
        "seed": 0,
        "analysis": [
            {"kind": "fringe_stability", "duration_s": 3600.0, "cadence_s": 60.0, "drift_deg": 15.0,
             "start_phase_rad": 3.0, "noise": 0.05},
        ],
    },
}


def preset_config(name) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
