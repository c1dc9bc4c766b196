"""Command-line entry point: ``stlsim <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import system
from ..bands import third_octave_bands
from ..materials import AIR
from ..mesh import export_mesh
from ..reference import coincidence_frequency, reference_curves, write_reference_csv
from .config import ConfigError, load_config, with_overrides
from .pipeline import plan_intervals, run_convergence, run_stl, wall_spec
from .presets import DESCRIPTIONS, PRESETS, load_preset


def _common(p: argparse.ArgumentParser, freq: bool = True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="scenario file (JSON)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    if freq:
        p.add_argument("--fmin", type=float)
        p.add_argument("--fmax", type=float)
        p.add_argument("--df", type=float)
        p.add_argument("--nodes-per-wavelength", type=float, dest="nodes")
    p.add_argument("--out-dir")


def _runner(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=None, help=f"parallel frequencies (default ${system.WORKERS_ENV} or 1)")
    p.add_argument("--snapshot-fields", action="store_true", help="store the full solution per frequency")
    p.add_argument("--quiet", action="store_true", help="no per-frequency progress lines")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlsim", description="Sound transmission loss of a two-room test facility")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("mesh", help="build meshes and print statistics")
    _common(p)
    p = sub.add_parser("sweep", help="narrowband microphone pressures")
    _common(p)
    _runner(p)
    p = sub.add_parser("stl", help="full pipeline to one-third-octave STL")
    _common(p)
    _runner(p)
    p = sub.add_parser("converge", help="FRAC study over sampling rates")
    _common(p)
    _runner(p)
    p.add_argument("--rates", default="7,10,13,16", help="comma-separated nodes per wavelength")
    p.add_argument("--interval", type=float, default=25.0)
    p = sub.add_parser("reference", help="analytic reference curves")
    _common(p, freq=False)
    sub.add_parser("presets", help="list built-in scenarios")
    return ap


def _config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    else:
        raise ConfigError(["either --config or --preset is required"])
    kw = {k: getattr(args, k, None) for k in ("fmin", "fmax", "df", "nodes")}
    if any(v is not None for v in kw.values()) or args.out_dir:
        cfg = with_overrides(cfg, f_min=kw["fmin"], f_max=kw["fmax"], df=kw["df"], nodes=kw["nodes"], out_dir=args.out_dir)
    return cfg


def _cmd_mesh(cfg, args) -> int:
    out = Path(args.out_dir) if args.out_dir else None
    for k, p in enumerate(plan_intervals(cfg)):
        st = p.scene.stats()
        lengths = ", ".join(f"{d}={v:g}" for d, v in p.lengths.items())
        print(
            f"[{p.f_lo:g}, {p.f_hi:g}] Hz: {lengths}; nodes {st['nodes']}, dofs {st['dofs']} "
            f"(retained {st['dofs'] - st['clamped_dofs']}), solves {len(p.frequencies)}"
        )
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            export_mesh(p.scene, out / f"mesh_{k}.txt")
    return 0


def _cmd_reference(cfg, args) -> int:
    wall = wall_spec(cfg)
    bands = third_octave_bands(*cfg.bands)
    curves = reference_curves(bands, wall)
    out = Path(args.out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_reference_csv(bands, curves, out / "reference.csv")
    for h in sorted(set(wall.leaves)):
        fc = coincidence_frequency(AIR.c, wall.solid.rho * h, wall.solid.bending_stiffness(h))
        print(f"coincidence frequency (h={h:g} m): {fc:.2f} Hz")
    if curves["f0"] is not None:
        print(f"double-wall resonance: {curves['f0']:.2f} Hz")
    print(f"wrote {out / 'reference.csv'}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in sorted(PRESETS):
            print(f"{name:12s} {DESCRIPTIONS[name]}")
        return 0
    try:
        cfg = _config(args)
        if args.command == "mesh":
            return _cmd_mesh(cfg, args)
        if args.command == "reference":
            return _cmd_reference(cfg, args)
        progress = not args.quiet
        if args.command in ("sweep", "stl"):
            res = run_stl(
                cfg,
                workers=args.workers,
                out_dir=args.out_dir,
                snapshot=args.snapshot_fields,
                progress=progress,
                narrowband_only=args.command == "sweep",
            )
            for b, R in zip(res.stl.bands, res.stl.levels):
                print(f"{b.nominal:>8g} Hz  R = {R:7.2f} dB")
            return 0 if res.ok else 1
        if args.command == "converge":
            rates = [float(r) for r in args.rates.split(",") if r.strip()]
            conv = run_convergence(
                cfg, rates, interval=args.interval, workers=args.workers, out_dir=args.out_dir or cfg.out_dir, progress=progress
            )
            for (a, b, room), rep in conv.reports.items():
                vals = " ".join(f"{iv.value:.3f}" for iv in rep)
                print(f"{room:9s} {a:g} vs {b:g}: {vals}")
            return 0 if all(np.isfinite(iv.value) for rep in conv.reports.values() for iv in rep) else 1
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except system.SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
