"""Scenario execution: build potentials, run an engine, write snapshots and analyse them."""

from __future__ import annotations

import json
import logging
import math
import os
import platform
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..analysis import (
    ImbalanceTrace,
    RadiusSeries,
    fit_gaussian_radius,
    fit_temperature,
    fit_two_regime,
    imbalance,
    phase_drift_series,
    region_mask,
)
from ..core import K_B, DensityMap, EnergyValue, Grid2D, PotentialMap
from ..dynamics import (
    ClassicalIntegrator,
    PotentialStack,
    RampSchedule,
    SplitStepPropagator,
    absorbing_mask,
    apply_ramp,
    co2_potential,
    default_ramp,
    density,
    gaussian_packet,
    sample_ensemble,
    thermal_field,
)
from ..dynamics.classical import AtomEnsemble
from ..io import quicklook_pgm, read_density_csv, write_density_csv, write_potential_csv, write_trace_csv
from ..optics import (
    DEVICE_SHAPE,
    ImagingSystem,
    atom_plane_grating,
    blur,
    load_slm_pattern,
    mtf_from_images,
    project_to_atom_plane,
    psf_from_mtf,
    psf_kernel,
)
from ..trap import TrapConfig, inplane_potential, synthetic_fringe_image
from .config import ScenarioConfig
from .geometry import Outline, build_outline

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION, EXIT_ANALYSIS = 0, 2, 3, 4
NK = K_B * 1e-9


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.exc = exc


@dataclass
class Snapshot:
    t: float
    density: DensityMap
    file: str = ""


@dataclass
class RunState:
    cfg: ScenarioConfig
    imaging: ImagingSystem
    trap: TrapConfig
    outline: Outline
    snapshots: list = field(default_factory=list)


# -- builders -----------------------------------------------------------------

def build_imaging(cfg) -> ImagingSystem:
    im = cfg["imaging"]
    return ImagingSystem(im["magnification"], im["psf_model"], im["psf_fwhm_m"],
                         EnergyValue.from_microkelvin(im["max_depth_uK"]), tuple(im["field_extent_m"]))


def build_trap(cfg) -> TrapConfig:
    tr = cfg["trap"]
    env = tr["inplane_envelope_depth_nK"]
    return TrapConfig(fringe_spacing=tr["fringe_spacing_m"],
                      depth_u0=EnergyValue.from_microkelvin(tr["depth_uK"]),
                      escape_depth=EnergyValue.from_microkelvin(tr["escape_depth_uK"]),
                      inplane_freq=tr["inplane_freq_hz"], rayleigh_range=tr["rayleigh_range_m"],
                      inplane_envelope_depth=None if env is None else EnergyValue.from_nanokelvin(env))


def build_pattern(cfg, imaging) -> Outline:
    src = cfg["pattern_source"]
    if "file" in src:
        pattern = load_slm_pattern(Path(cfg.resolve_path(src["file"])).read_bytes(), expected_shape=DEVICE_SHAPE)
        return Outline(pattern, pattern.pixels == 0)
    return build_outline(src["preset"], src.get("params", {}), imaging)


def build_schedule(cfg):
    """``(schedule or None, static powers)`` for the run window."""
    ramp = cfg["ramp"]
    if ramp["mode"] == "static":
        return None, dict(ramp["powers"])
    if ramp["mode"] == "segments":
        sched = RampSchedule({k: [tuple(s) for s in v] for k, v in ramp["segments"].items()})
    else:
        sched = default_ramp(ramp["pattern_during_loading"])
    offset = ramp["time_offset_s"]
    if offset >= sched.end_time:
        # every beam is already at its held value
        return None, apply_ramp(sched, offset)
    return sched, apply_ramp(sched, offset)


def build_stack(cfg, imaging, trap, outline, grid) -> PotentialStack:
    if np.any(outline.pattern.pixels):
        pattern = project_to_atom_plane(outline.pattern, imaging, grid)
    else:
        pattern = PotentialMap(grid, np.zeros(grid.shape))
    co2 = cfg["co2"]
    components = {
        "co2": co2_potential(grid, EnergyValue.from_nanokelvin(co2["depth_nK"]), co2["waist_m"]),
        "planar_1064": inplane_potential(trap, grid),
        "pattern_532": pattern,
    }
    _, powers = build_schedule(cfg)
    return PotentialStack(components, powers)


def sim_grid(cfg) -> Grid2D:
    g = cfg["run"]["grid"]
    return Grid2D.centered(g["extent_m"][0], g["extent_m"][1], g["pitch_m"])


def snapshot_grid(cfg, grid: Grid2D) -> Grid2D:
    pitch = cfg["run"]["snapshot_pitch_m"]
    if pitch is None or pitch == grid.pitch:
        return grid
    if cfg["engine"] == "wave":
        return grid.coarsen(int(round(pitch / grid.pitch)))
    ex, ey = cfg["run"]["grid"]["extent_m"]
    return Grid2D.centered(ex, ey, pitch)


def snapshot_steps(cfg):
    """Sorted unique step indices at which snapshots are taken."""
    run = cfg["run"]
    dt, duration = run["dt_s"], run["duration_s"]
    if run["snapshot_times_s"] is not None:
        times = run["snapshot_times_s"]
    else:
        every = run["snapshot_every_s"]
        times = [k * every for k in range(int(math.floor(duration / every + 1e-9)) + 1)]
    return sorted({int(round(t / dt)) for t in times})


def interior_on_grid(outline: Outline, imaging: ImagingSystem, grid: Grid2D):
    """Nearest-pixel lookup of the outline interior at each grid cell centre."""
    a = imaging.atom_plane_pixel(outline.pattern.pixel_pitch)
    ny, nx = outline.interior.shape
    cols = np.floor(grid.x / a + (nx - 1) / 2 + 0.5).astype(int)
    rows = np.floor(grid.y / a + (ny - 1) / 2 + 0.5).astype(int)
    ok_c = (cols >= 0) & (cols < nx)
    ok_r = (rows >= 0) & (rows < ny)
    mask = np.zeros(grid.shape, dtype=bool)
    sub = outline.interior[np.ix_(rows[ok_r], cols[ok_c])]
    mask[np.ix_(ok_r, ok_c)] = sub
    return mask


def resolve_region(spec, grid, state: RunState):
    if spec["kind"] != "interior":
        inner = {k: v for k, v in spec.items() if k not in ("within", "invert")}
        mask = region_mask(inner, grid)
    else:
        mask = interior_on_grid(state.outline, state.imaging, grid)
    if "within" in spec:
        mask = mask & resolve_region(spec["within"], grid, state)
    if spec.get("invert"):
        mask = ~mask
    return mask


# -- engines ------------------------------------------------------------------

def _initial_ensemble(cfg, grid, state):
    run = cfg["run"]
    src = run["source"]
    n, temp, seed = run["atoms"], run["temperature_nK"] * 1e-9, cfg["seed"]
    if src["kind"] == "gaussian":
        return sample_ensemble(n, temp, src.get("radius_m", 1e-6), seed, tuple(src.get("center_m", (0.0, 0.0))))
    mask = resolve_region(src["region"], grid, state)
    cells = np.flatnonzero(mask.ravel())
    if cells.size == 0:
        raise ValueError("source region is empty")
    base = sample_ensemble(n, temp, 0.0, seed)
    rng = np.random.default_rng([seed, 2])
    pick = cells[rng.integers(0, cells.size, n)]
    iy, ix = np.unravel_index(pick, grid.shape)
    jitter = rng.random((n, 2)) - 0.5
    pos = np.column_stack([grid.x[ix], grid.y[iy]]) + jitter * grid.pitch
    return AtomEnsemble(pos, base.velocities, base.alive, base.mass, seed)


def run_classical(cfg, stack, state, snap_grid, threads=None):
    run = cfg["run"]
    sched, _ = build_schedule(cfg)
    escape = run["escape_energy_uK"]
    if escape is None:
        escape = cfg["trap"]["escape_depth_uK"]
    integ = ClassicalIntegrator(stack, run["dt_s"], EnergyValue.from_microkelvin(escape),
                                ramp=sched, ramp_offset=cfg["ramp"]["time_offset_s"], seed=cfg["seed"])
    ens = _initial_ensemble(cfg, stack.grid, state)
    step = 0
    for target in snapshot_steps(cfg):
        ens = integ.run(ens, target - step, t0=step * run["dt_s"])
        step = target
        state.snapshots.append(Snapshot(target * run["dt_s"], density(ens, snap_grid)))
    return {"atoms_initial": len(ens), "atoms_alive": ens.n_alive, "steps": step}


def run_wave(cfg, stack, state, snap_grid, threads=None):
    run = cfg["run"]
    grid = stack.grid
    src = run["source"]
    temp = run["temperature_nK"] * 1e-9
    if src["kind"] == "gaussian":
        wf = gaussian_packet(grid, src.get("radius_m", 1e-6), tuple(src.get("center_m", (0.0, 0.0))),
                             g=run["interaction_g"])
        # the run temperature still sets the resolution the grid must reach
        wf = replace(wf, temperature_scale=temp)
    else:
        mask = resolve_region(src["region"], grid, state)
        wf = thermal_field(grid, temp, mask, cfg["seed"], smoothing=src.get("smoothing_m", 2e-6))
        if run["interaction_g"]:
            wf = replace(wf, interaction_g=run["interaction_g"])
    sched, _ = build_schedule(cfg)
    cap = run["potential_cap_nK"]
    prop = SplitStepPropagator(stack, run["dt_s"], g=run["interaction_g"],
                               absorber=absorbing_mask(grid) if run["absorber"] else None,
                               potential_cap=None if cap is None else EnergyValue.from_nanokelvin(cap),
                               ramp=sched, ramp_offset=cfg["ramp"]["time_offset_s"], workers=threads)
    step = 0
    for target in snapshot_steps(cfg):
        wf = prop.evolve(wf, target - step, t0=step * run["dt_s"])
        step = target
        state.snapshots.append(Snapshot(target * run["dt_s"], density(wf, snap_grid)))
    return {"grid_shape": list(grid.shape), "final_norm": wf.norm, "steps": step}


# -- analyses -----------------------------------------------------------------

def _analysis_expansion(spec, state, out):
    t_min = spec.get("t_min_s", 0.008)
    ts, rs, es = [], [], []
    for snap in state.snapshots:
        if snap.t >= t_min - 1e-12:
            fit = fit_gaussian_radius(snap.density)
            ts.append(snap.t)
            rs.append(fit.radius)
            es.append(fit.radius_err)
    write_trace_csv(out / "trace_radius.csv", ts, np.column_stack([rs, es]), ("t_s", "radius_m", "radius_err_m"))
    result = fit_temperature(RadiusSeries(ts, rs, es))
    return {"temperature_nK": result.temperature * 1e9, "temperature_err_nK": result.temperature_err * 1e9,
            "slope_m2_per_s2": result.slope, "r0_squared_m2": result.r0_squared,
            "flags": list(result.flags), "n_points": len(ts)}


def _analysis_imbalance(spec, state, out, cache):
    if not state.snapshots:
        raise ValueError("no snapshots to analyse")
    grid = state.snapshots[0].density.grid
    mi = resolve_region(spec["mask_initial"], grid, state)
    mf = resolve_region(spec["mask_final"], grid, state)
    t = np.array([s.t for s in state.snapshots])
    dn = np.array([imbalance(s.density, mi, mf) for s in state.snapshots])
    write_trace_csv(out / "trace_imbalance.csv", t, dn, ("t_s", "imbalance"))
    cache["imbalance"] = ImbalanceTrace(t, dn, {"mask_initial": spec["mask_initial"],
                                                "mask_final": spec["mask_final"]})
    window = spec.get("early_window_s", 0.04)
    early = dn[t <= window + 1e-12]
    return {"initial": float(dn[0]), "final": float(dn[-1]), "n_samples": len(dn),
            "early_window_s": window,
            "early_strictly_decreasing": bool(len(early) > 1 and np.all(np.diff(early) < 0))}


def _analysis_two_regime(spec, state, out, cache):
    trace = cache["imbalance"]
    fit = fit_two_regime(trace, tuple(spec.get("window", (0.1, 0.7))))
    write_trace_csv(out / "trace_two_regime_fit.csv", trace.t, np.column_stack([trace.dn, fit.predict(trace.t)]),
                    ("t_s", "imbalance", "model"))
    return fit.to_dict()


def _analysis_region_fraction(spec, state, out):
    grid = state.snapshots[0].density.grid
    masks = {name: resolve_region(r, grid, state) for name, r in spec["regions"].items()}
    t = np.array([s.t for s in state.snapshots])
    result = {}
    columns = []
    for name, mask in masks.items():
        frac = np.array([s.density.values[mask].sum() / max(s.density.total, 1e-300) for s in state.snapshots])
        columns.append(frac)
        result[name] = {"values": frac.tolist(), "final": float(frac[-1]), "max": float(frac.max()),
                        "monotone_nondecreasing": bool(np.all(np.diff(frac) >= 0)),
                        "strictly_increasing": bool(np.all(np.diff(frac) > 0))}
    write_trace_csv(out / "trace_region_fraction.csv", t, np.column_stack(columns), ("t_s", *masks))
    result["t_s"] = t.tolist()
    return result


def _analysis_fringe(spec, state, out, seed):
    trap = state.trap
    d = trap.fringe_spacing
    pitch = spec.get("pixel_m", d / 16)
    ny = int(round(spec.get("periods", 6) * d / pitch))
    grid = Grid2D(spec.get("columns", 32), ny, pitch, (0.0, 0.0))
    duration, cadence = spec.get("duration_s", 3600.0), spec.get("cadence_s", 60.0)
    drift = math.radians(spec.get("drift_deg", 15.0))
    phi0 = spec.get("start_phase_rad", 3.0)
    noise = spec.get("noise", 0.05)
    phase_noise = math.radians(spec.get("phase_noise_deg", 0.0))
    rng = np.random.default_rng([seed, 3])
    times = np.arange(0.0, duration + 1e-9, cadence)
    images = []
    for t in times:
        phi = phi0 + drift * t / duration + phase_noise * rng.standard_normal()
        images.append((t, synthetic_fringe_image(trap, phi, noise, grid, rng=rng)))
    series = phase_drift_series(images, d, grid.y)
    write_trace_csv(out / "trace_fringe_phase.csv", series.t, series.phase, ("t_s", "phase_rad"))
    out_dict = series.to_dict()
    out_dict.update({"injected_drift_deg": math.degrees(drift), "n_images": len(times)})
    return out_dict


def _analysis_mtf(spec, state, out):
    imaging = state.imaging
    pitch = spec.get("target_pitch_m", 0.09e-6)
    periods = spec.get("periods_m", [7.2e-6, 3.6e-6, 2.16e-6, 1.44e-6, 0.72e-6])
    kernel = psf_kernel(imaging, pitch)
    pairs = []
    for period in periods:
        n_periods = max(8, int(math.ceil(spec.get("min_extent_m", 60e-6) / period)))
        nx = int(round(n_periods * period / pitch))
        grid = Grid2D(nx + 2 * kernel.shape[1], kernel.shape[0] + 8, pitch, (0.0, 0.0))
        image = blur(atom_plane_grating(period, grid), kernel)
        # keep whole periods away from the zero-padded edges
        margin = kernel.shape[1]
        core = image[kernel.shape[0] // 2: kernel.shape[0] // 2 + 8, margin: margin + nx]
        pairs.append((period, core))
    curve = mtf_from_images(pairs, pitch)
    psf = psf_from_mtf(curve)
    result = {"mtf": curve.to_dict(), "psf": psf.to_dict(), "configured_fwhm_m": imaging.psf_fwhm}
    write_trace_csv(out / "trace_psf.csv", psf.r[:2048], psf.amplitude[:2048], ("r_m", "amplitude"))
    return result


def run_analyses(cfg, state: RunState, out: Path):
    results = []
    cache = {}
    for i, spec in enumerate(cfg["analysis"]):
        kind = spec["kind"]
        try:
            if kind == "expansion_fit":
                res = _analysis_expansion(spec, state, out)
            elif kind == "imbalance":
                res = _analysis_imbalance(spec, state, out, cache)
            elif kind == "two_regime":
                res = _analysis_two_regime(spec, state, out, cache)
            elif kind == "region_fraction":
                res = _analysis_region_fraction(spec, state, out)
            elif kind == "fringe_stability":
                res = _analysis_fringe(spec, state, out, cfg["seed"])
            else:
                res = _analysis_mtf(spec, state, out)
        except Exception as exc:
            raise StageError(f"analysis[{i}] {kind}", exc) from exc
        results.append({"kind": kind, **res})
    return results


# -- output -------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def provenance(cfg):
    return {"config_hash": cfg.hash, "seed": cfg["seed"],
            "versions": {"artifact": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()}}


def _snap_name(t):
    return f"snap_{t * 1e3:09.3f}ms.csv"


def write_snapshots(state, out: Path):
    rows = []
    for snap in state.snapshots:
        snap.file = _snap_name(snap.t)
        write_density_csv(out / snap.file, snap.density)
        rows.append(f"{snap.file},{snap.t!r}")
    (out / "snapshots.csv").write_text("file,t_s\n" + "\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")


def load_snapshots(out: Path):
    index = (out / "snapshots.csv").read_text(encoding="utf-8").splitlines()[1:]
    snaps = []
    for line in index:
        name, t = line.split(",")
        snaps.append(Snapshot(float(t), read_density_csv(out / name), name))
    return snaps


def _fail(out, stage, exc):
    (out / "FAILED").write_text(f"stage: {stage}\nerror: {type(exc).__name__}: {exc}\n", encoding="utf-8")


def run_scenario(cfg: ScenarioConfig, out_dir, threads=None) -> int:
    """Execute ``cfg`` into ``out_dir``; returns the process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stale in ("FAILED",):
        (out / stale).unlink(missing_ok=True)
    write_json(out / "normalized_config.json", cfg.data)
    report = {"engine": cfg["engine"], "description": cfg["description"], **provenance(cfg)}

    try:
        imaging = build_imaging(cfg)
        trap = build_trap(cfg)
        outline = build_pattern(cfg, imaging)
        state = RunState(cfg, imaging, trap, outline)
        report["geometry_flags"] = list(outline.flags)
        if cfg["engine"] != "none":
            grid = sim_grid(cfg)
            stack = build_stack(cfg, imaging, trap, outline, grid)
            write_potential_csv(out / "potential.csv", stack.composed_map())
            quicklook_pgm(out / "potential.pgm", stack.composed())
            snap = snapshot_grid(cfg, grid)
            engine = run_classical if cfg["engine"] == "classical" else run_wave
            log.info("running %s engine on a %dx%d grid", cfg["engine"], grid.nx, grid.ny)
            report["run"] = engine(cfg, stack, state, snap, threads)
            write_snapshots(state, out)
            report["snapshots"] = [{"file": s.file, "t_s": s.t} for s in state.snapshots]
    except Exception as exc:
        stage = "simulation"
        log.error("%s failed: %s", stage, exc)
        report.update(status="failed", failed_stage=stage, error=f"{type(exc).__name__}: {exc}")
        write_json(out / "report.json", report)
        _fail(out, stage, exc)
        return EXIT_SIMULATION

    code = analyse_into(cfg, state, out, report)
    return code


def analyse_into(cfg, state, out: Path, report: dict) -> int:
    try:
        report["analysis"] = run_analyses(cfg, state, out)
        report["status"] = "ok"
        code = EXIT_OK
    except StageError as exc:
        log.error("%s", exc)
        report.update(status="failed", failed_stage=exc.stage, error=f"{type(exc.exc).__name__}: {exc.exc}")
        _fail(out, exc.stage, exc.exc)
        code = EXIT_ANALYSIS
    write_json(out / "report.json", report)
    return code


def analyze_run(run_dir) -> int:
    """Re-run the analyses of a finished run from its saved artifacts."""
    from .config import load_config

    out = Path(run_dir)
    cfg = load_config(out / "normalized_config.json")
    imaging = build_imaging(cfg)
    state = RunState(cfg, imaging, build_trap(cfg), build_pattern(cfg, imaging))
    if (out / "snapshots.csv").exists():
        state.snapshots = load_snapshots(out)
    report = {"engine": cfg["engine"], "description": cfg["description"], **provenance(cfg),
              "geometry_flags": list(state.outline.flags),
              "snapshots": [{"file": s.file, "t_s": s.t} for s in state.snapshots], "reanalysis": True}
    (out / "FAILED").unlink(missing_ok=True)
    return analyse_into(cfg, state, out, report)
