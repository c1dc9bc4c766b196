"""End-to-end runs: meshing per frequency interval, sweeps, band levels and STL."""
from __future__ import annotations

import csv
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import system
from ..bands import BandSpectrum, NarrowbandSpectrum, stl_spectrum, third_octave_bands
from ..materials import PorousMedium, wavelength
from ..mesh import Layout, Scene, build_layout_scene, element_length
from ..reference import WallSpec, frac_report
from ..system import FieldResult
from .config import ScenarioConfig


def round_length(x: float, digits: int | None) -> float:
    """Round half up to ``digits`` decimals, never to zero."""
    if digits is None:
        return x
    q = 10.0**digits
    return max(math.floor(x * q + 0.5 + 1e-9) / q, 1.0 / q)


def sizing_lengths(cfg: ScenarioConfig, f_max: float, nodes: float | None = None) -> dict:
    """Target element lengths per medium kind at ``f_max``."""
    nodes = cfg.frequency.nodes_per_wavelength if nodes is None else nodes
    rd = cfg.frequency.round_digits
    h = cfg.sizing_thickness or min(cfg.leaves)
    out = {"structure": round_length(element_length(wavelength(f_max, cfg.solid, h), nodes), rd)}
    for dom in cfg.domains:
        m = cfg.medium(dom)
        kind = "porous" if isinstance(m, PorousMedium) else "fluid"
        out[kind] = min(out.get(kind, math.inf), round_length(element_length(wavelength(f_max, m), nodes), rd))
    return out


def domain_lengths(cfg: ScenarioConfig, kinds: dict) -> dict:
    """Map scene domains to element lengths, merged to one size for conforming meshes."""
    per = {"wall": kinds["structure"]}
    for dom in cfg.domains:
        kind = "porous" if isinstance(cfg.medium(dom), PorousMedium) else "fluid"
        per[dom] = kinds[kind]
    if cfg.frequency.mesh == "conforming":
        lo = min(per.values())
        per = {k: lo for k in per}
    return per


def build_scene(cfg: ScenarioConfig, l_e: dict) -> Scene:
    layout = Layout(
        l_sr=cfg.source_room[0],
        l_rr=cfg.receiving_room[0],
        l_y=cfg.source_room[1],
        l_z=cfg.source_room[2],
        leaves=cfg.leaves,
        l_g=cfg.gap,
    )
    media = {dom: (cfg.medium(dom), spec.damping) for dom, spec in cfg.domains.items()}
    return build_layout_scene(
        layout,
        l_e,
        media,
        cfg.solid,
        sources=cfg.sources,
        mics=cfg.microphones,
        Q_s=cfg.Q_s,
        receiving_relative=cfg.receiving_relative,
    )


@dataclass
class IntervalPlan:
    f_lo: float
    f_hi: float
    lengths: dict  # per domain
    scene: Scene
    frequencies: np.ndarray


def plan_intervals(cfg: ScenarioConfig, nodes: float | None = None) -> list[IntervalPlan]:
    plans = []
    grids = system.interval_frequencies(cfg.frequency.intervals, cfg.frequency.df)
    explicit = cfg.frequency.element_lengths if nodes is None else None
    for k, ((lo, hi), freqs) in enumerate(zip(cfg.frequency.intervals, grids)):
        kinds = dict(explicit[k]) if explicit is not None else sizing_lengths(cfg, hi, nodes)
        if explicit is not None and any(key not in kinds for key in ("structure", "fluid")):
            kinds = {**sizing_lengths(cfg, hi, nodes), **kinds}
        per = domain_lengths(cfg, kinds)
        plans.append(IntervalPlan(lo, hi, per, build_scene(cfg, per), freqs))
    return plans


def merge_results(per_interval: Sequence[Sequence[FieldResult]]) -> list[FieldResult]:
    """Concatenate interval sweeps; a frequency shared by two intervals keeps the later (finer) result."""
    by_f: dict[float, FieldResult] = {}
    for results in per_interval:
        for r in results:
            by_f[round(r.frequency, 9)] = r
    return [by_f[f] for f in sorted(by_f)]


def to_spectra(results: Sequence[FieldResult]) -> dict[str, NarrowbandSpectrum]:
    ok = [r for r in results if r.ok]
    rooms = sorted({room for r in ok for room in r.pressures})
    out = {}
    for room in rooms:
        f = np.array([r.frequency for r in ok])
        vals = np.array([r.pressures[room] for r in ok]).T
        out[room] = NarrowbandSpectrum(f, vals)
    return out


def covered_bands(cfg: ScenarioConfig, f_lo: float, f_hi: float):
    """Bands in the configured range; those not fully inside the swept range are returned separately."""
    bands = third_octave_bands(*cfg.bands)
    inside = [b for b in bands if b.f_l >= f_lo - 1e-9 and b.f_u <= f_hi + cfg.frequency.df]
    outside = [b for b in bands if b not in inside]
    return inside, outside


@dataclass
class RunOutput:
    stl: BandSpectrum
    results: list[FieldResult]
    manifest: list[str]
    failed: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


def _drift_lines(scene: Scene) -> list[str]:
    lines = []
    for s in scene.sets:
        if s.role in ("source", "microphone") and s.drift is not None:
            lines.append(f"  {s.name}: max {s.drift.max():.4f} m, mean {s.drift.mean():.4f} m")
    return lines


def run_stl(
    cfg: ScenarioConfig,
    workers: int | None = None,
    out_dir: str | Path | None = None,
    snapshot: bool = False,
    progress: bool = False,
    narrowband_only: bool = False,
) -> RunOutput:
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    plans = plan_intervals(cfg)
    manifest = [
        f"name: {cfg.name}",
        f"config_hash: {cfg.hash()}",
        f"solver: {system.default_backend()}",
        f"workers: {workers or system.default_workers()}",
    ]
    per_interval = []
    for k, p in enumerate(plans):
        st = p.scene.stats()
        t1 = time.perf_counter()
        res = system.sweep(p.scene, p.frequencies, workers=workers, snapshot=snapshot, progress=progress)
        per_interval.append(res)
        manifest += [
            f"interval {k}: [{p.f_lo:g}, {p.f_hi:g}] Hz",
            "  element_lengths: " + ", ".join(f"{d}={v:g}" for d, v in p.lengths.items()),
            f"  dofs: {st['dofs']} (retained {st['dofs'] - st['clamped_dofs']})",
            f"  elements: fluid {st['fluid_elements']}, shell {st['shell_elements']}",
            f"  solves: {len(res)} (failed {sum(not r.ok for r in res)})",
            f"  time_s: {time.perf_counter() - t1:.2f}",
        ]
        manifest += _drift_lines(p.scene)
        if snapshot:
            for r in res:
                if r.ok and r.field is not None:
                    np.save(out / f"field_{r.frequency:g}Hz.npy", r.field)
    results = merge_results(per_interval)
    failed = [r.frequency for r in results if not r.ok]
    for r in results:
        if not r.ok:
            print(f"warning: {r.frequency:g} Hz failed: {r.error}", file=sys.stderr)
    system.write_narrowband_csv(results, out / "narrowband.csv")

    spectra = to_spectra(results)
    inside, outside = covered_bands(cfg, cfg.frequency.f_min, cfg.frequency.f_max)
    if narrowband_only or "source" not in spectra or "receiving" not in spectra:
        stl = BandSpectrum([], np.zeros(0), missing=[b.index for b in inside + outside])
    else:
        stl = stl_spectrum(spectra["source"], spectra["receiving"], inside, cfg.S, cfg.A, cfg.correction)
        stl.missing = sorted(stl.missing + [b.index for b in outside])
        if stl.missing:
            warnings.warn(f"{len(stl.missing)} band(s) without full narrowband coverage omitted", stacklevel=2)
        stl.to_csv(out / "stl.csv")
    manifest += [
        f"bands: {len(stl.bands)} reported, {len(stl.missing)} omitted",
        f"failed_frequencies: {len(failed)}",
        f"total_time_s: {time.perf_counter() - t0:.2f}",
    ]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    return RunOutput(stl, results, manifest, failed)


def mean_pressure(results: Sequence[FieldResult], room: str) -> np.ndarray:
    return np.array([np.mean(r.pressures[room]) if r.ok else np.nan for r in results])


@dataclass
class ConvergenceOutput:
    rates: list[float]
    frequencies: np.ndarray
    mean_pressures: dict  # (rate, room) -> complex array
    reports: dict  # (rate_a, rate_b, room) -> list[FracInterval]
    drift: dict  # rate -> lines
    results: dict = field(default_factory=dict)  # rate -> list[FieldResult]


def run_convergence(
    cfg: ScenarioConfig,
    rates: Sequence[float],
    f_lo: float | None = None,
    f_hi: float | None = None,
    interval: float = 25.0,
    workers: int | None = None,
    out_dir: str | Path | None = None,
    progress: bool = False,
) -> ConvergenceOutput:
    """Sweep once per sampling rate on meshes sized for ``f_hi``; FRAC of consecutive rates."""
    if len(rates) < 2:
        raise ValueError("at least two sampling rates are needed")
    f_lo = cfg.frequency.f_min if f_lo is None else f_lo
    f_hi = cfg.frequency.f_max if f_hi is None else f_hi
    freqs = system.interval_frequencies([(f_lo, f_hi)], cfg.frequency.df)[0]
    means, drift, results = {}, {}, {}
    for rate in rates:
        per = domain_lengths(cfg, sizing_lengths(cfg, f_hi, rate))
        scene = build_scene(cfg, per)
        drift[rate] = _drift_lines(scene)
        res = system.sweep(scene, freqs, workers=workers, progress=progress)
        results[rate] = res
        for room in ("source", "receiving"):
            means[(rate, room)] = mean_pressure(res, room)
    reports = {}
    for a, b in zip(rates[:-1], rates[1:]):
        for room in ("source", "receiving"):
            reports[(a, b, room)] = frac_report(freqs, means[(a, room)], freqs, means[(b, room)], interval, f_lo, f_hi)
    conv = ConvergenceOutput(list(rates), freqs, means, reports, drift, results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_frac_csv(conv, out / "frac.csv")
        lines = [f"name: {cfg.name}", f"config_hash: {cfg.hash()}"]
        for rate in rates:
            lines.append(f"rate {rate:g}:")
            lines += drift[rate]
        (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return conv


def write_frac_csv(conv: ConvergenceOutput, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["room", "rate_a", "rate_b", "interval", "f_lo", "f_hi", "frac"])
        for (a, b, room), rep in conv.reports.items():
            for k, iv in enumerate(rep, 1):
                w.writerow([room, f"{a:g}", f"{b:g}", k, f"{iv.f_lo:g}", f"{iv.f_hi:g}", f"{iv.value:.9f}"])


def wall_spec(cfg: ScenarioConfig) -> WallSpec:
    gap_medium = cfg.medium("gap") if cfg.double_leaf else None
    return WallSpec(cfg.solid, tuple(cfg.leaves), cfg.gap or 0.0, gap_medium)
