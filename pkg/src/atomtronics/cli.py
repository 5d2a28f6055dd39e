"""Command-line entry point: ``atomtronics {project,trap,run,analyze,preset}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import Grid2D
from .io import quicklook_pgm, write_potential_csv
from .scenario.config import ConfigInvalid, load_config, validate_config
from .scenario.presets import PRESETS, preset_config
from .scenario.runner import (
    EXIT_CONFIG,
    EXIT_SIMULATION,
    analyze_run,
    build_imaging,
    build_pattern,
    build_trap,
    run_scenario,
    write_json,
)
from .optics import project_to_atom_plane
from .trap import trap_report

log = logging.getLogger("atomtronics")


def _config_or_default(path, seed=None):
    if path is None:
        cfg, errors = validate_config("{}")
        return cfg
    return load_config(path, seed)


def cmd_project(args):
    cfg = _config_or_default(args.config)
    imaging = build_imaging(cfg)
    outline = build_pattern(cfg, imaging)
    ex, ey = args.extent if args.extent else cfg["run"]["grid"]["extent_m"]
    grid = Grid2D.centered(ex, ey, args.pitch)
    potential = project_to_atom_plane(outline.pattern, imaging, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_potential_csv(out / "potential.csv", potential)
    quicklook_pgm(out / "potential.pgm", potential.values)
    print(f"wrote {out / 'potential.csv'} ({grid.nx}x{grid.ny}, max {potential.nanokelvin.max():.1f} nK)")
    return 0


def cmd_trap(args):
    cfg = _config_or_default(args.config)
    temperature = args.temperature * 1e-9 if args.temperature else cfg["run"]["temperature_nK"] * 1e-9
    report = trap_report(build_trap(cfg), temperature)
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "trap_report.json", report)
    print(text)
    return 0


def cmd_run(args):
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigInvalid as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    code = run_scenario(cfg, args.out, threads=args.threads)
    print(f"run finished with exit code {code}; report at {Path(args.out) / 'report.json'}")
    return code


def cmd_analyze(args):
    try:
        code = analyze_run(args.out)
    except ConfigInvalid as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"cannot re-analyse {args.out}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    print(f"analysis finished with exit code {code}")
    return code


def cmd_preset(args):
    cfg = preset_config(args.name)
    if args.seed is not None:
        cfg["seed"] = args.seed
    text = json.dumps(cfg, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="atomtronics", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project an SLM pattern to an atom-plane potential")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--pitch", type=float, default=0.25e-6, help="target grid pitch, m")
    p.add_argument("--extent", type=float, nargs=2, help="target grid extent x y, m")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("trap", help="vertical trap diagnostics")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--temperature", type=float, help="cloud temperature, nK")
    p.set_defaults(func=cmd_trap)

    p = sub.add_parser("run", help="run a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="FFT worker threads (performance only)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="re-run the analyses of a finished run directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", help="ignored; the run's normalized config is used")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("preset", help="emit a ready scenario config")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", help="file to write (default stdout)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
