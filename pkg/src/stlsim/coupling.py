"""Fluid-structure coupling matrices C = int N_s (n . e_d) N_f dGamma on flat walls.

Rows refer to shell nodes (the translational component along the wall normal),
columns to fluid nodes. ``n`` is the outward normal of the fluid domain, so a
fluid on the -x side of a wall couples with +1 and a fluid on the +x side with -1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .elements import gauss_rule, quad9_shape
from .mesh import FluidBlock, Interface, Scene, ShellPatch, faces_conform


class ConformityError(ValueError):
    """Face node layouts differ; use the non-conforming path."""


class InterfaceError(ValueError):
    """Wall and fluid face do not cover the same rectangle."""


@dataclass
class CouplingBlock:
    shell_nodes: np.ndarray  # global node ids, one per entry
    fluid_nodes: np.ndarray
    values: np.ndarray
    direction: int = 0  # global translational component coupled (0: x)

    def to_sparse(self, n_nodes: int) -> sp.csr_matrix:
        """Node-by-node matrix (duplicates summed)."""
        return sp.coo_matrix((self.values, (self.shell_nodes, self.fluid_nodes)), shape=(n_nodes, n_nodes)).tocsr()

    @property
    def total(self) -> float:
        return float(np.sum(self.values))


def _check_geometry(block: FluidBlock, shell: ShellPatch, side: str, tol: float = 1e-9) -> None:
    x_face = block.origin[0] + (block.extents[0] if side == "x+" else 0.0)
    if abs(x_face - shell.x) > tol:
        raise InterfaceError(f"{shell.name} is not on the {side} face of {block.name}")
    if np.any(np.abs(block.origin[1:] - shell.origin) > tol) or np.any(np.abs(block.extents[1:] - shell.extents) > tol):
        raise InterfaceError(f"{shell.name} and the face of {block.name} cover different rectangles")


def _face_element_nodes(block: FluidBlock, side: str) -> np.ndarray:
    """(n_face_elements, 9) fluid node ids of the face, elements ordered y fastest."""
    g = block.face_grid(side)
    ny, nz = block.divisions[1], block.divisions[2]
    out = np.empty((ny * nz, 9), dtype=np.int64)
    e = 0
    for b in range(nz):
        for a in range(ny):
            out[e] = g[2 * b : 2 * b + 3, 2 * a : 2 * a + 3].ravel()
            e += 1
    return out


def conforming_coupling(scene: Scene, interface: Interface) -> CouplingBlock:
    block = scene.blocks[interface.fluid]
    shell = scene.shells[interface.shell]
    _check_geometry(block, shell, interface.side)
    if not faces_conform(block, shell):
        raise ConformityError(
            f"{shell.name} and {block.name} have different face node layouts; use nonconforming_coupling"
        )
    q = gauss_rule(3, 2)
    N, _ = quad9_shape(q.points[:, 0], q.points[:, 1])
    dA = 0.25 * np.prod(shell.element_size)
    Me = np.einsum("g,ga,gb->ab", q.weights * dA, N, N)
    s_conn = shell.connectivity()
    f_conn = _face_element_nodes(block, interface.side)
    rows = np.repeat(s_conn, 9, axis=1).ravel()
    cols = np.tile(f_conn, (1, 9)).ravel()
    vals = np.tile(interface.normal_sign * Me.ravel(), len(s_conn))
    return CouplingBlock(rows, cols, vals)


def _locate(edges: np.ndarray, t: np.ndarray):
    """Element index and local coordinate in [-1, 1] for points on a 1D grid."""
    e = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 2)
    h = edges[e + 1] - edges[e]
    return e, 2.0 * (t - edges[e]) / h - 1.0


def nonconforming_coupling(scene: Scene, interface: Interface, tol: float = 1e-9) -> CouplingBlock:
    """Mortar projection on the merged grid of both face meshes.

    Each cell of the merged grid lies inside exactly one wall element and one
    fluid face element, so 3x3 Gauss integrates the biquadratic product exactly.
    """
    block = scene.blocks[interface.fluid]
    shell = scene.shells[interface.shell]
    _check_geometry(block, shell, interface.side, tol)
    s_edges = [shell.axis_coords(a)[::2] for a in range(2)]
    f_edges = [block.axis_coords(a + 1)[::2] for a in range(2)]
    # the fluid grid is snapped onto the wall rectangle so both share exact end points
    for a in range(2):
        f_edges[a] = f_edges[a].copy()
        f_edges[a][[0, -1]] = s_edges[a][[0, -1]]
    merged = [np.unique(np.concatenate([s_edges[a], f_edges[a]])) for a in range(2)]
    merged = [m[np.concatenate([[True], np.diff(m) > tol])] for m in merged]
    for a in range(2):
        merged[a][-1] = s_edges[a][-1]

    gx, gw = np.polynomial.legendre.leggauss(3)
    pts, wts = [], []
    for a in range(2):
        lo, hi = merged[a][:-1], merged[a][1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts.append((mid[:, None] + half[:, None] * gx[None, :]).ravel())
        wts.append((half[:, None] * gw[None, :]).ravel())
    Y, Z = np.meshgrid(pts[0], pts[1], indexing="xy")
    WY, WZ = np.meshgrid(wts[0], wts[1], indexing="xy")
    y, z, w = Y.ravel(), Z.ravel(), (WY * WZ).ravel()

    ea, xa = _locate(s_edges[0], y)
    eb, xb = _locate(s_edges[1], z)
    Ns, _ = quad9_shape(xa, xb)
    s_conn = shell.connectivity()[ea + shell.divisions[0] * eb]

    fa, ya = _locate(f_edges[0], y)
    fb, yb = _locate(f_edges[1], z)
    Nf, _ = quad9_shape(ya, yb)
    f_conn = _face_element_nodes(block, interface.side)[fa + block.divisions[1] * fb]

    vals = interface.normal_sign * (w[:, None, None] * Ns[:, :, None] * Nf[:, None, :])
    rows = np.broadcast_to(s_conn[:, :, None], vals.shape).ravel()
    cols = np.broadcast_to(f_conn[:, None, :], vals.shape).ravel()
    # merge duplicate (row, col) pairs to keep the block compact
    C = sp.coo_matrix((vals.ravel(), (rows, cols))).tocsr()
    C.sum_duplicates()
    Cc = C.tocoo()
    return CouplingBlock(Cc.row.astype(np.int64), Cc.col.astype(np.int64), Cc.data)


def interface_coupling(scene: Scene, interface: Interface) -> CouplingBlock:
    if interface.conforming:
        return conforming_coupling(scene, interface)
    return nonconforming_coupling(scene, interface)
