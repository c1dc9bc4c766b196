"""Scenario configuration: JSON ingestion, defaults and validation."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..materials import (
    AIR,
    GLASS_WOOL,
    PLASTERBOARD,
    DampingModel,
    FluidMedium,
    MaterialError,
    PorousMedium,
    SolidMedium,
)

DEFAULT_Q_S = 1e-4
DEFAULT_T = 1.5
DEFAULT_NODES = 13
BUILTIN_MATERIALS = {"air": AIR, "glass_wool": GLASS_WOOL, "plasterboard": PLASTERBOARD}


class ConfigError(ValueError):
    """All schema violations found, one per line with its field path."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


@dataclass
class DomainSpec:
    material: str
    damping: DampingModel = field(default_factory=DampingModel)


@dataclass
class FrequencyPlan:
    intervals: list[tuple[float, float]]
    df: float = 1.0
    nodes_per_wavelength: float = DEFAULT_NODES
    element_lengths: list[dict] | None = None  # explicit lengths per interval
    round_digits: int | None = 2
    mesh: str = "domain"  # "domain" (per-domain sizes) or "conforming" (one size)

    @property
    def f_min(self) -> float:
        return self.intervals[0][0]

    @property
    def f_max(self) -> float:
        return self.intervals[-1][1]


@dataclass
class ScenarioConfig:
    name: str
    source_room: tuple[float, float, float]
    receiving_room: tuple[float, float, float]
    gap: float | None
    leaves: list[float]
    wall_material: str
    materials: dict[str, Any]
    domains: dict[str, DomainSpec]
    sources: np.ndarray
    microphones: dict[str, np.ndarray]
    frequency: FrequencyPlan
    Q_s: float = DEFAULT_Q_S
    receiving_relative: bool = True
    sizing_thickness: float | None = None
    bands: tuple[float, float] = (8.0, 630.0)
    correction: bool = False
    S: float | None = None
    A: float | None = None
    out_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def double_leaf(self) -> bool:
        return len(self.leaves) == 2

    def medium(self, domain: str):
        return self.materials[self.domains[domain].material]

    @property
    def solid(self) -> SolidMedium:
        return self.materials[self.wall_material]

    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _num(d: dict, key: str, path: str, errs: list, default=None, positive=True):
    if key not in d:
        if default is None:
            errs.append(f"{path}.{key}: required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        errs.append(f"{path}.{key}: expected a finite number, got {v!r}")
        return default
    if positive and v <= 0:
        errs.append(f"{path}.{key}: must be positive")
    return float(v)


def _vec(v, n: int, path: str, errs: list):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        errs.append(f"{path}: expected a list of {n} numbers")
        return None
    if a.shape != (n,) or not np.all(np.isfinite(a)):
        errs.append(f"{path}: expected a list of {n} finite numbers")
        return None
    return a


def _positions(v, path: str, errs: list) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        errs.append(f"{path}: expected a list of [x, y, z] positions")
        return np.zeros((0, 3))
    if a.size == 0:
        return np.zeros((0, 3))
    if a.ndim != 2 or a.shape[1] != 3 or not np.all(np.isfinite(a)):
        errs.append(f"{path}: expected a list of [x, y, z] positions")
        return np.zeros((0, 3))
    return a


def _material(name: str, spec: dict, path: str, errs: list, known: dict):
    kind = spec.get("type")
    params = {k: v for k, v in spec.items() if k not in ("type", "saturating")}
    try:
        if kind == "fluid":
            return FluidMedium(**params)
        if kind == "solid":
            return SolidMedium(**params)
        if kind == "porous":
            sat = spec.get("saturating", "air")
            if sat not in known or not isinstance(known[sat], FluidMedium):
                errs.append(f"{path}.saturating: unknown fluid {sat!r}")
                return None
            return PorousMedium(saturating=known[sat], **params)
    except (TypeError, MaterialError) as exc:
        errs.append(f"{path}: {exc}")
        return None
    errs.append(f"{path}.type: expected fluid, porous or solid, got {kind!r}")
    return None


def _damping(spec, path: str, errs: list) -> DampingModel:
    if spec is None:
        return DampingModel()
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "none")
    T = spec.get("T", DEFAULT_T if kind == "reverberation" else None)
    try:
        return DampingModel(kind, T)
    except MaterialError as exc:
        errs.append(f"{path}: {exc}")
        return DampingModel()


def config_from_dict(d: dict) -> ScenarioConfig:
    """Validate a configuration mapping; every problem is reported at once."""
    errs: list[str] = []
    raw = copy.deepcopy(d)
    if not isinstance(d, dict):
        raise ConfigError(["<root>: expected an object"])

    rooms = d.get("rooms", {})
    sr = _vec(rooms.get("source"), 3, "rooms.source", errs)
    rr = _vec(rooms.get("receiving"), 3, "rooms.receiving", errs)
    for label, r in (("rooms.source", sr), ("rooms.receiving", rr)):
        if r is not None and np.any(r <= 0):
            errs.append(f"{label}: extents must be positive")
    if sr is not None and rr is not None and not np.allclose(sr[1:], rr[1:], rtol=0, atol=1e-12):
        errs.append("rooms: source and receiving rooms need the same y-z cross-section")

    walls = d.get("walls", {})
    leaves = walls.get("leaves", [])
    if not isinstance(leaves, list) or len(leaves) not in (1, 2) or not all(isinstance(h, (int, float)) and h > 0 for h in leaves):
        errs.append("walls.leaves: one or two positive thicknesses")
        leaves = [0.05]
    gap = d.get("gap")
    gap_w = None
    if gap is not None:
        gap_w = _num(gap, "l_x", "gap", errs)
    if (len(leaves) == 2) != (gap_w is not None):
        errs.append("gap: a gap is required exactly for double-leaf walls")
    sizing = walls.get("sizing_thickness")
    if sizing is not None and (not isinstance(sizing, (int, float)) or sizing <= 0):
        errs.append("walls.sizing_thickness: must be positive")

    materials = dict(BUILTIN_MATERIALS)
    for name, spec in (d.get("materials") or {}).items():
        if not isinstance(spec, dict):
            errs.append(f"materials.{name}: expected an object")
            continue
        m = _material(name, spec, f"materials.{name}", errs, materials)
        if m is not None:
            materials[name] = m

    wall_mat = walls.get("material", "plasterboard")
    if wall_mat not in materials:
        errs.append(f"walls.material: unknown material {wall_mat!r}")
    elif not isinstance(materials[wall_mat], SolidMedium):
        errs.append(f"walls.material: {wall_mat!r} is not a solid")

    needed = ["source", "receiving"] + (["gap"] if len(leaves) == 2 else [])
    domains = {}
    dspec = d.get("domains", {})
    for dom in needed:
        spec = dspec.get(dom)
        if spec is None:
            errs.append(f"domains.{dom}: required")
            continue
        mat = spec.get("material")
        if mat not in materials:
            errs.append(f"domains.{dom}.material: domain {dom!r} references unknown material {mat!r}")
        elif isinstance(materials[mat], SolidMedium):
            errs.append(f"domains.{dom}.material: {mat!r} is a solid, expected fluid or porous")
        domains[dom] = DomainSpec(mat, _damping(spec.get("damping"), f"domains.{dom}.damping", errs))

    src = d.get("sources", {})
    sources = _positions(src.get("positions", []), "sources.positions", errs)
    Q_s = _num(src, "Q_s", "sources", errs, default=DEFAULT_Q_S)
    mics_in = d.get("microphones", {})
    receiving_relative = bool(mics_in.get("receiving_relative", True))
    mics = {room: _positions(mics_in.get(room, []), f"microphones.{room}", errs) for room in ("source", "receiving")}

    fq = d.get("frequency", {})
    intervals = fq.get("intervals")
    if intervals is None and "f_min" in fq:
        intervals = [[fq.get("f_min"), fq.get("f_max")]]
    iv = []
    try:
        iv = [(float(a), float(b)) for a, b in intervals]
    except (TypeError, ValueError):
        errs.append("frequency.intervals: expected a list of [f_lo, f_hi] pairs")
    for k, (a, b) in enumerate(iv):
        if not (0 < a <= b):
            errs.append(f"frequency.intervals[{k}]: need 0 < f_lo <= f_hi")
        if k and a != iv[k - 1][1]:
            errs.append(f"frequency.intervals[{k}]: intervals must be contiguous")
    if not iv:
        iv = [(1.0, 1.0)]
        if intervals is not None:
            errs.append("frequency.intervals: at least one interval required")
    df = _num(fq, "df", "frequency", errs, default=1.0)
    nodes = _num(fq, "nodes_per_wavelength", "frequency", errs, default=float(DEFAULT_NODES))
    if nodes is not None and nodes < 3:
        errs.append("frequency.nodes_per_wavelength: at least 3")
    lengths = fq.get("element_lengths")
    if lengths is not None:
        if not isinstance(lengths, list) or len(lengths) != len(iv):
            errs.append("frequency.element_lengths: one entry per interval")
            lengths = None
        else:
            for k, e in enumerate(lengths):
                for key, v in (e or {}).items():
                    if key not in ("structure", "fluid", "porous") or not isinstance(v, (int, float)) or v <= 0:
                        errs.append(f"frequency.element_lengths[{k}].{key}: positive length for structure/fluid/porous")
    mesh_mode = fq.get("mesh", "domain")
    if mesh_mode not in ("domain", "conforming"):
        errs.append("frequency.mesh: 'domain' or 'conforming'")
    rd = fq.get("round_digits", 2)
    if rd is not None and (not isinstance(rd, int) or rd < 0):
        errs.append("frequency.round_digits: non-negative integer or null")

    bands = d.get("bands", {})
    b_lo = _num(bands, "f_min", "bands", errs, default=8.0)
    b_hi = _num(bands, "f_max", "bands", errs, default=630.0)

    out = d.get("output", {})
    correction = bool(d.get("correction", False))
    S = d.get("S")
    A = d.get("A")
    if correction and not (isinstance(S, (int, float)) and isinstance(A, (int, float)) and S > 0 and A > 0):
        errs.append("correction: needs positive S and A")

    cfg = None
    if not errs:
        cfg = ScenarioConfig(
            name=str(d.get("name", "scenario")),
            source_room=tuple(sr),
            receiving_room=tuple(rr),
            gap=gap_w,
            leaves=[float(h) for h in leaves],
            wall_material=wall_mat,
            materials=materials,
            domains=domains,
            sources=sources,
            microphones=mics,
            frequency=FrequencyPlan(iv, df, nodes, lengths, rd, mesh_mode),
            Q_s=Q_s,
            receiving_relative=receiving_relative,
            sizing_thickness=sizing,
            bands=(b_lo, b_hi),
            correction=correction,
            S=S,
            A=A,
            out_dir=str(out.get("dir", "out")),
            raw=raw,
        )
        errs += _check_positions(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def _check_positions(cfg: ScenarioConfig) -> list[str]:
    errs = []
    sr = np.asarray(cfg.source_room)
    x0_rr = cfg.source_room[0] + (cfg.gap or 0.0)
    boxes = {"source": (np.zeros(3), sr), "receiving": (np.array([x0_rr, 0, 0]), np.asarray(cfg.receiving_room))}
    checks = [("sources.positions", "source", cfg.sources, False)]
    checks += [(f"microphones.{r}", r, cfg.microphones[r], r == "receiving" and cfg.receiving_relative) for r in ("source", "receiving")]
    for path, room, pos, rel in checks:
        lo, ext = boxes[room]
        for k, p in enumerate(pos):
            q = p + (np.array([x0_rr, 0, 0]) if rel else 0.0)
            if np.any(q < lo - 1e-9) or np.any(q > lo + ext + 1e-9):
                errs.append(f"{path}[{k}]: position {tuple(q)} lies outside the {room} room")
    return errs


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<file>: not valid JSON ({exc})"]) from exc
    return config_from_dict(d)


def with_overrides(
    cfg: ScenarioConfig,
    f_min: float | None = None,
    f_max: float | None = None,
    df: float | None = None,
    nodes: float | None = None,
    mesh: str | None = None,
    out_dir: str | None = None,
) -> ScenarioConfig:
    """Copy of ``cfg`` with a trimmed frequency plan or new sampling rate.

    A new sampling rate drops explicit element lengths so sizes are recomputed.
    """
    d = copy.deepcopy(cfg.raw)
    fq = d.setdefault("frequency", {})
    iv = [list(x) for x in cfg.frequency.intervals]
    lengths = cfg.frequency.element_lengths
    lengths = list(lengths) if lengths is not None else None
    if f_max is not None:
        keep = [k for k, (a, _) in enumerate(iv) if a < f_max or k == 0]
        iv = [iv[k] for k in keep]
        iv[-1][1] = min(iv[-1][1], f_max)
        lengths = [lengths[k] for k in keep] if lengths is not None else None
        # the sizes of a capped interval no longer match its upper frequency
        if lengths is not None and iv[-1][1] != cfg.frequency.intervals[keep[-1]][1]:
            lengths = None
    if f_min is not None:
        keep = [k for k, (_, b) in enumerate(iv) if b > f_min or k == len(iv) - 1]
        iv = [iv[k] for k in keep]
        iv[0][0] = max(iv[0][0], f_min)
        lengths = [lengths[k] for k in keep] if lengths is not None else None
    fq["intervals"] = iv
    if f_min is not None or f_max is not None:
        fq.pop("f_min", None)
        fq.pop("f_max", None)
    fq["element_lengths"] = lengths
    if df is not None:
        fq["df"] = df
    if nodes is not None:
        fq["nodes_per_wavelength"] = nodes
        fq["element_lengths"] = None
    if mesh is not None:
        fq["mesh"] = mesh
    if out_dir is not None:
        d.setdefault("output", {})["dir"] = out_dir
    return config_from_dict(d)
