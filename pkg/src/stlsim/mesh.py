"""Structured meshing of box-shaped fluid domains and rectangular walls.

All geometry is axis-aligned: rooms are stacked along x, walls are planes
x = const spanning the shared y-z cross-section. Node ids are global and dense;
within a domain they run lexicographically with x (or the first in-plane axis)
fastest, and domains are concatenated in scene order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .materials import DampingModel, FluidMedium, PorousMedium, SolidMedium

_DIV_EPS = 1e-9


class MeshError(ValueError):
    """Invalid mesh request or position outside its domain."""


def element_length(lambda_min: float, nodes_per_wavelength: float) -> float:
    """Element length for quadratic elements: each element spans two node intervals."""
    if nodes_per_wavelength < 3:
        raise MeshError("a quadratic element needs at least 3 nodes per wavelength")
    if lambda_min <= 0:
        raise MeshError("wavelength must be positive")
    return 2.0 * lambda_min / (nodes_per_wavelength - 1)


def divisions(length: float, l_e: float) -> int:
    """Smallest element count whose element length does not exceed ``l_e``."""
    if length <= 0 or l_e <= 0:
        raise MeshError("lengths must be positive")
    # the tolerance keeps 1.05 / 0.03 from becoming 36 after round-off
    return max(1, math.ceil(length / l_e - _DIV_EPS))


def _grid_connectivity_3d(n: Sequence[int]) -> np.ndarray:
    nx, ny, nz = n
    Nx, Ny = 2 * nx + 1, 2 * ny + 1
    ex, ey, ez = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ex, ey, ez = (a.transpose(2, 1, 0).ravel() for a in (ex, ey, ez))
    base = 2 * ex + Nx * (2 * ey) + Nx * Ny * (2 * ez)
    k, j, i = np.meshgrid(np.arange(3), np.arange(3), np.arange(3), indexing="ij")
    local = (i + Nx * j + Nx * Ny * k).ravel()
    return base[:, None] + local[None, :]


def _grid_connectivity_2d(n: Sequence[int]) -> np.ndarray:
    na, nb = n
    Na = 2 * na + 1
    ea, eb = np.meshgrid(np.arange(na), np.arange(nb), indexing="xy")
    base = (2 * ea + Na * 2 * eb).ravel()
    j, i = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    local = (i + Na * j).ravel()
    return base[:, None] + local[None, :]


@dataclass
class FluidBlock:
    """Box of tri-quadratic hexahedra. ``medium`` is air or an equivalent fluid."""

    name: str
    origin: np.ndarray
    extents: np.ndarray
    divisions: tuple[int, int, int]
    medium: FluidMedium | PorousMedium = field(default_factory=FluidMedium)
    damping: DampingModel = field(default_factory=DampingModel)
    node_offset: int = 0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.extents = np.asarray(self.extents, dtype=float)
        self.divisions = tuple(int(d) for d in self.divisions)
        if np.any(self.extents <= 0) or min(self.divisions) < 1:
            raise MeshError(f"{self.name}: extents and divisions must be positive")

    @property
    def grid_shape(self) -> tuple[int, int, int]:
        """Node counts per axis (x, y, z)."""
        return tuple(2 * d + 1 for d in self.divisions)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.divisions))

    @property
    def element_size(self) -> np.ndarray:
        return self.extents / np.asarray(self.divisions)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.linspace(0.0, self.extents[axis], self.grid_shape[axis])

    def coords(self) -> np.ndarray:
        x, y, z = (self.axis_coords(a) for a in range(3))
        Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def connectivity(self) -> np.ndarray:
        """(n_elements, 27) global node ids, local order i + 3 j + 9 k."""
        return _grid_connectivity_3d(self.divisions) + self.node_offset

    def reference_element(self) -> np.ndarray:
        """Coordinates of the first element; all elements are translates of it."""
        h = self.element_size
        k, j, i = np.meshgrid(np.arange(3), np.arange(3), np.arange(3), indexing="ij")
        return self.origin + 0.5 * np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1) * h

    def face_grid(self, side: str) -> np.ndarray:
        """Global node ids on an x face as a (n_z_nodes, n_y_nodes) array."""
        Nx, Ny, Nz = self.grid_shape
        i = 0 if side == "x-" else Nx - 1 if side == "x+" else None
        if i is None:
            raise MeshError(f"unsupported face {side!r}")
        k, j = np.meshgrid(np.arange(Nz), np.arange(Ny), indexing="ij")
        return self.node_offset + i + Nx * j + Nx * Ny * k

    def contains(self, p, tol: float = 1e-12) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.origin - tol) and np.all(p <= self.origin + self.extents + tol))


@dataclass
class ShellPatch:
    """Wall in the plane x = ``x`` spanning [y0, y0 + l_y] x [z0, z0 + l_z].

    Local axes: e1 = +y, e2 = +z, e3 = +x. Nodes run y fastest.
    """

    name: str
    x: float
    origin: np.ndarray  # (y0, z0)
    extents: np.ndarray  # (l_y, l_z)
    divisions: tuple[int, int]
    h: float
    solid: SolidMedium
    node_offset: int = 0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.extents = np.asarray(self.extents, dtype=float)
        self.divisions = tuple(int(d) for d in self.divisions)
        if self.h <= 0:
            raise MeshError(f"{self.name}: thickness must be positive")
        if np.any(self.extents <= 0) or min(self.divisions) < 1:
            raise MeshError(f"{self.name}: extents and divisions must be positive")

    normal = np.array([1.0, 0.0, 0.0])

    @property
    def grid_shape(self) -> tuple[int, int]:
        return tuple(2 * d + 1 for d in self.divisions)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.divisions))

    @property
    def element_size(self) -> np.ndarray:
        return self.extents / np.asarray(self.divisions)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.linspace(0.0, self.extents[axis], self.grid_shape[axis])

    def coords(self) -> np.ndarray:
        y, z = self.axis_coords(0), self.axis_coords(1)
        Z, Y = np.meshgrid(z, y, indexing="ij")
        return np.stack([np.full(Y.size, self.x), Y.ravel(), Z.ravel()], axis=1)

    def connectivity(self) -> np.ndarray:
        return _grid_connectivity_2d(self.divisions) + self.node_offset

    def reference_element(self) -> np.ndarray:
        h = self.element_size
        j, i = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
        yz = self.origin + 0.5 * np.stack([i.ravel(), j.ravel()], axis=1) * h
        return np.column_stack([np.full(9, self.x), yz])

    def grid(self) -> np.ndarray:
        Na, Nb = self.grid_shape
        return self.node_offset + np.arange(Na * Nb).reshape(Nb, Na)

    def boundary_nodes(self) -> np.ndarray:
        g = self.grid()
        edge = np.zeros(g.shape, dtype=bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        return np.sort(g[edge])


def mesh_fluid_box(extents, l_e_target: float, origin=(0.0, 0.0, 0.0), name: str = "fluid", **kw) -> FluidBlock:
    ext = np.asarray(extents, dtype=float)
    n = tuple(divisions(L, l_e_target) for L in ext)
    return FluidBlock(name, np.asarray(origin, dtype=float), ext, n, **kw)


def mesh_shell(
    extents, l_e_target: float, h: float, solid: SolidMedium | None = None, x: float = 0.0, origin=(0.0, 0.0), name: str = "wall"
) -> ShellPatch:
    ext = np.asarray(extents, dtype=float)
    n = tuple(divisions(L, l_e_target) for L in ext)
    if solid is None:
        from .materials import PLASTERBOARD

        solid = PLASTERBOARD
    return ShellPatch(name, x, np.asarray(origin, dtype=float), ext, n, h, solid)


def snap_point(coords: np.ndarray, p, ids: np.ndarray | None = None) -> tuple[int, float]:
    """Closest node to ``p``; ties go to the lowest id. Returns (id, distance)."""
    coords = np.asarray(coords, dtype=float)
    if coords.size == 0:
        raise MeshError("cannot snap onto an empty mesh")
    d = np.linalg.norm(coords - np.asarray(p, dtype=float), axis=1)
    if ids is None:
        ids = np.arange(len(coords))
    dmin = d.min()
    # exact ties and ties up to round-off both resolve to the lowest id
    cand = np.flatnonzero(d <= dmin * (1 + 1e-12) + 1e-15)
    k = cand[np.argmin(ids[cand])]
    return int(ids[k]), float(d[k])


def snap_to_block(block: FluidBlock, p) -> tuple[int, float]:
    """Structured-grid snap: per-axis nearest index, lowest index on ties."""
    p = np.asarray(p, dtype=float)
    if not block.contains(p, tol=1e-9):
        raise MeshError(f"position {tuple(p)} lies outside {block.name}")
    idx = []
    for a in range(3):
        ax = block.axis_coords(a)
        d = np.abs(ax - p[a])
        cand = np.flatnonzero(d <= d.min() * (1 + 1e-12) + 1e-15)
        idx.append(int(cand[0]))
    Nx, Ny, _ = block.grid_shape
    local = idx[0] + Nx * idx[1] + Nx * Ny * idx[2]
    q = np.array([block.axis_coords(a)[idx[a]] for a in range(3)])
    return block.node_offset + local, float(np.linalg.norm(q - p))


@dataclass
class NodeSet:
    name: str
    ids: np.ndarray
    role: str  # source | microphone | clamped | interface
    domain: str = ""
    nominal: np.ndarray | None = None  # requested positions, one row per id
    drift: np.ndarray | None = None  # snap distances

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.role not in ("source", "microphone", "clamped", "interface"):
            raise MeshError(f"unknown node-set role {self.role!r}")


@dataclass
class Interface:
    """Link between one wall face and one fluid face.

    ``normal_sign`` is the x component of the fluid's outward normal on the
    shared face (+1 if the fluid lies on the -x side of the wall).
    """

    fluid: int  # index into Scene.blocks
    side: str  # fluid face, "x-" or "x+"
    shell: int  # index into Scene.shells
    normal_sign: float
    conforming: bool = False


@dataclass
class Scene:
    blocks: list[FluidBlock]
    shells: list[ShellPatch]
    interfaces: list[Interface]
    sets: list[NodeSet] = field(default_factory=list)
    Q_s: float = 1e-4
    rooms: dict[str, int] = field(default_factory=dict)  # room role -> block index

    @property
    def n_nodes(self) -> int:
        return sum(b.n_nodes for b in self.blocks) + sum(s.n_nodes for s in self.shells)

    @property
    def n_dofs(self) -> int:
        """Degrees of freedom before clamping: 1 per fluid node, 6 per shell node."""
        return sum(b.n_nodes for b in self.blocks) + 6 * sum(s.n_nodes for s in self.shells)

    def sets_by_role(self, role: str) -> list[NodeSet]:
        return [s for s in self.sets if s.role == role]

    def microphones(self, room: str) -> NodeSet | None:
        for s in self.sets:
            if s.role == "microphone" and s.domain == room:
                return s
        return None

    def coords(self) -> np.ndarray:
        parts = [b.coords() for b in self.blocks] + [s.coords() for s in self.shells]
        return np.concatenate(parts) if parts else np.zeros((0, 3))

    def clamped_nodes(self) -> np.ndarray:
        out = [s.ids for s in self.sets if s.role == "clamped"]
        return np.unique(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)

    def stats(self) -> dict:
        return {
            "nodes": self.n_nodes,
            "dofs": self.n_dofs,
            "clamped_dofs": 6 * len(self.clamped_nodes()),
            "fluid_elements": sum(b.n_elements for b in self.blocks),
            "shell_elements": sum(s.n_elements for s in self.shells),
        }


def _renumber(blocks: list[FluidBlock], shells: list[ShellPatch]) -> None:
    off = 0
    for d in [*blocks, *shells]:
        d.node_offset = off
        off += d.n_nodes


def faces_conform(block: FluidBlock, shell: ShellPatch, tol: float = 1e-9) -> bool:
    """True if the fluid face and the wall have the same node layout."""
    if tuple(block.divisions[1:]) != tuple(shell.divisions):
        return False
    return all(np.allclose(block.axis_coords(a + 1), shell.axis_coords(a), atol=tol, rtol=0) for a in range(2))


@dataclass
class Layout:
    """Geometry-only description of a facility; element lengths are per domain."""

    l_sr: float
    l_rr: float
    l_y: float
    l_z: float
    leaves: Sequence[float]  # leaf thicknesses, one or two
    l_g: float | None = None


def build_layout_scene(
    layout: Layout,
    l_e: dict,
    media: dict,
    solid: SolidMedium,
    sources: Sequence = (),
    mics: dict | None = None,
    Q_s: float = 1e-4,
    receiving_relative: bool = True,
    conforming: str = "auto",
) -> Scene:
    """Mesh a room (gap) room facility with walls at zero geometric thickness.

    ``l_e`` maps domain names ("source", "gap", "receiving", "wall") to target
    element lengths. ``media`` maps room names to (medium, damping) pairs.
    Microphone positions of the receiving room are shifted by l_SR (+ l_G) when
    ``receiving_relative`` is set.
    """
    n_leaves = len(layout.leaves)
    if n_leaves not in (1, 2):
        raise MeshError("one or two leaves supported")
    if (n_leaves == 2) != (layout.l_g is not None and layout.l_g > 0):
        raise MeshError("a gap is required exactly for double-leaf walls")
    yz = (layout.l_y, layout.l_z)
    blocks = []
    x = 0.0
    rooms = {}

    def add_block(name, lx):
        medium, damping = media[name]
        blocks.append(
            mesh_fluid_box((lx, *yz), l_e[name], origin=(x, 0.0, 0.0), name=name, medium=medium, damping=damping)
        )
        rooms[name] = len(blocks) - 1

    add_block("source", layout.l_sr)
    x += layout.l_sr
    wall_x = [x]
    if n_leaves == 2:
        add_block("gap", layout.l_g)
        x += layout.l_g
        wall_x.append(x)
    add_block("receiving", layout.l_rr)
    shells = [
        mesh_shell(yz, l_e["wall"], h, solid=solid, x=wx, name=f"wall{k + 1}")
        for k, (h, wx) in enumerate(zip(layout.leaves, wall_x))
    ]
    _renumber(blocks, shells)

    interfaces = []
    for s_idx, sh in enumerate(shells):
        for b_idx, b in enumerate(blocks):
            if abs(b.origin[0] + b.extents[0] - sh.x) < 1e-12:
                side, sign = "x+", 1.0
            elif abs(b.origin[0] - sh.x) < 1e-12:
                side, sign = "x-", -1.0
            else:
                continue
            conf = faces_conform(b, sh)
            if conforming == "always" and not conf:
                raise MeshError(f"{b.name} and {sh.name} do not conform")
            interfaces.append(Interface(b_idx, side, s_idx, sign, conforming=conf and conforming != "never"))

    sets = [NodeSet(f"{sh.name}_clamped", sh.boundary_nodes(), "clamped", domain=sh.name) for sh in shells]
    scene = Scene(blocks, shells, interfaces, sets, Q_s=Q_s, rooms=rooms)
    src_block = blocks[rooms["source"]]
    if len(sources):
        scene.sets.append(_snapped_set("sources", "source", src_block, np.asarray(sources, dtype=float)))
    offset = layout.l_sr + (layout.l_g or 0.0)
    for room, pos in (mics or {}).items():
        pos = np.atleast_2d(np.asarray(pos, dtype=float)).copy()
        if room == "receiving" and receiving_relative:
            pos[:, 0] += offset
        scene.sets.append(_snapped_set(f"mics_{room}", "microphone", blocks[rooms[room]], pos))
    _warn_collisions(scene)
    return scene


def _snapped_set(name: str, role: str, block: FluidBlock, positions: np.ndarray, domain: str | None = None) -> NodeSet:
    ids, drift = [], []
    for p in positions:
        i, d = snap_to_block(block, p)
        ids.append(i)
        drift.append(d)
    return NodeSet(name, np.array(ids), role, domain=domain or block.name, nominal=positions, drift=np.array(drift))


def _warn_collisions(scene: Scene) -> None:
    seen: dict[int, str] = {}
    for s in scene.sets:
        if s.role not in ("source", "microphone"):
            continue
        for i in s.ids:
            if int(i) in seen:
                warnings.warn(f"node {int(i)} used by both {seen[int(i)]} and {s.name}", stacklevel=3)
            seen[int(i)] = s.name


def single_box_scene(block: FluidBlock, sources=(), mics=(), Q_s: float = 1e-4) -> Scene:
    """Scene with one fluid block and no walls (rigid boundaries)."""
    block.node_offset = 0
    scene = Scene([block], [], [], [], Q_s=Q_s, rooms={"source": 0})
    if len(sources):
        scene.sets.append(_snapped_set("sources", "source", block, np.atleast_2d(sources), "source"))
    if len(mics):
        scene.sets.append(_snapped_set("mics_source", "microphone", block, np.atleast_2d(mics), "source"))
    _warn_collisions(scene)
    return scene


def export_mesh(scene: Scene, path: str | Path) -> None:
    """Plain-text dump.

    Layout: a ``# nodes N`` header then ``id x y z`` lines; ``# hex27 <block> E``
    and ``# quad9 <wall> E`` headers followed by node ids per element; ``# set
    <name> <role> K`` followed by one id per line.
    """
    coords = scene.coords()
    with open(path, "w") as fh:
        fh.write(f"# nodes {len(coords)}\n")
        for i, (x, y, z) in enumerate(coords):
            fh.write(f"{i} {x:.9g} {y:.9g} {z:.9g}\n")
        for b in scene.blocks:
            conn = b.connectivity()
            fh.write(f"# hex27 {b.name} {len(conn)}\n")
            np.savetxt(fh, conn, fmt="%d")
        for s in scene.shells:
            conn = s.connectivity()
            fh.write(f"# quad9 {s.name} {len(conn)}\n")
            np.savetxt(fh, conn, fmt="%d")
        for ns in scene.sets:
            fh.write(f"# set {ns.name} {ns.role} {len(ns.ids)}\n")
            np.savetxt(fh, ns.ids[:, None], fmt="%d")
