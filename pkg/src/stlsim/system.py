"""Global coupled system, direct solvers and the frequency sweep.

Unknowns are fluid pressures (one per fluid node) followed by shell
displacements and rotations (six per shell node, global axes). The operator

    A(w) = [ K_f/(rho w^2) - M_f/(rho c^2)      -C^T       ]
           [          -C                  K_s - w^2 M_s    ]

is complex symmetric. Frequency-independent integrals are assembled once into
aligned data vectors on a common sparsity pattern, so each frequency only
forms a linear combination of them.
"""
from __future__ import annotations

import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coupling import interface_coupling
from .elements import fluid_element, shell_element_global
from . import pardiso
from .materials import fluid_properties
from .mesh import Scene

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8
WORKERS_ENV = "STLSIM_WORKERS"


class SolverError(RuntimeError):
    """Factorization failed or the residual check did not pass."""


class ScalingError(ValueError):
    """The scaled formulation is undefined at zero frequency."""


@dataclass
class DofMap:
    """Fluid node k -> equation k; shell node k -> n_fluid + 6 (k - n_fluid_nodes) + c."""

    n_fluid: int
    n_shell_nodes: int
    eliminated: np.ndarray

    def __post_init__(self):
        self.eliminated = np.unique(np.asarray(self.eliminated, dtype=np.int64))
        keep = np.ones(self.n_total, dtype=bool)
        keep[self.eliminated] = False
        self.retained = np.flatnonzero(keep)
        self.full_to_reduced = np.full(self.n_total, -1, dtype=np.int64)
        self.full_to_reduced[self.retained] = np.arange(self.retained.size)

    @classmethod
    def from_scene(cls, scene: Scene) -> "DofMap":
        n_fluid = sum(b.n_nodes for b in scene.blocks)
        n_sh = sum(s.n_nodes for s in scene.shells)
        clamped = scene.clamped_nodes()
        first = n_fluid + 6 * (clamped - n_fluid)
        elim = (first[:, None] + np.arange(6)[None, :]).ravel()
        return cls(n_fluid, n_sh, elim)

    @property
    def n_total(self) -> int:
        return self.n_fluid + 6 * self.n_shell_nodes

    @property
    def n_retained(self) -> int:
        return int(self.retained.size)

    def fluid_dof(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        if np.any(nodes >= self.n_fluid):
            raise IndexError("not a fluid node")
        return nodes

    def shell_dof(self, nodes, component: int = 0) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        if np.any(nodes < self.n_fluid):
            raise IndexError("not a shell node")
        return self.n_fluid + 6 * (nodes - self.n_fluid) + component

    def reduce(self, dofs) -> np.ndarray:
        return self.full_to_reduced[np.asarray(dofs, dtype=np.int64)]


@dataclass
class _Component:
    kind: str  # fluid-K, fluid-M, shell-K, shell-M, coupling
    domain: int
    data: np.ndarray


@dataclass
class BlockSystem:
    A: sp.csr_matrix
    b: np.ndarray
    omega: float
    dofmap: DofMap


@dataclass
class FieldResult:
    frequency: float
    pressures: dict  # room -> complex array over that room's microphones
    field: np.ndarray | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _block_coo(conn: np.ndarray, Ke: np.ndarray, dofs: Callable[[np.ndarray], np.ndarray]):
    d = dofs(conn)
    n = d.shape[1]
    rows = np.broadcast_to(d[:, :, None], (d.shape[0], n, n)).ravel()
    cols = np.broadcast_to(d[:, None, :], (d.shape[0], n, n)).ravel()
    vals = np.broadcast_to(Ke[None], (d.shape[0], n, n)).ravel()
    return rows, cols, vals


class Assembler:
    """Frequency-independent integrals of a scene on one sparsity pattern."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.dofmap = DofMap.from_scene(scene)
        dm = self.dofmap
        parts: list[tuple[str, int, np.ndarray, np.ndarray, np.ndarray]] = []

        for k, blk in enumerate(scene.blocks):
            Ke, Me = fluid_element(blk.reference_element())
            conn = blk.connectivity()
            r, c, v = _block_coo(conn, Ke, dm.fluid_dof)
            parts.append(("fluid-K", k, r, c, v))
            r, c, v = _block_coo(conn, Me, dm.fluid_dof)
            parts.append(("fluid-M", k, r, c, v))

        def shell_dofs(conn):
            base = dm.shell_dof(conn)
            return (base[:, :, None] + np.arange(6)[None, None, :]).reshape(len(conn), -1)

        for k, sh in enumerate(scene.shells):
            Ke, Me = shell_element_global(sh.reference_element(), sh.solid, sh.h, complex_modulus=False)
            conn = sh.connectivity()
            r, c, v = _block_coo(conn, Ke, shell_dofs)
            parts.append(("shell-K", k, r, c, v))
            r, c, v = _block_coo(conn, Me, shell_dofs)
            parts.append(("shell-M", k, r, c, v))

        for k, itf in enumerate(scene.interfaces):
            cb = interface_coupling(scene, itf)
            sr = dm.shell_dof(cb.shell_nodes, cb.direction)
            fc = dm.fluid_dof(cb.fluid_nodes)
            # -C in the structure rows, -C^T in the fluid rows
            parts.append(("coupling", k, np.concatenate([sr, fc]), np.concatenate([fc, sr]), -np.concatenate([cb.values, cb.values])))

        n = dm.n_retained
        self.n = n
        reduced = []
        for kind, dom, r, c, v in parts:
            rr, cc = dm.reduce(r), dm.reduce(c)
            keep = (rr >= 0) & (cc >= 0)
            reduced.append((kind, dom, rr[keep], cc[keep], np.asarray(v, dtype=float)[keep]))

        keys = np.concatenate([rr * n + cc for _, _, rr, cc, _ in reduced]) if reduced else np.zeros(0, np.int64)
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.indices = (uniq % n).astype(np.int32)
        rows = uniq // n
        self.indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int32)
        self.components: list[_Component] = []
        start = 0
        for kind, dom, rr, cc, v in reduced:
            inv = inverse[start : start + rr.size]
            start += rr.size
            self.components.append(_Component(kind, dom, np.bincount(inv, weights=v, minlength=uniq.size)))

        self.b_unit = np.zeros(n, dtype=complex)
        for s in scene.sets_by_role("source"):
            idx = dm.reduce(dm.fluid_dof(s.ids))
            np.add.at(self.b_unit, idx, 1.0)
        self.mic_index = {
            s.domain: dm.reduce(dm.fluid_dof(s.ids)) for s in scene.sets_by_role("microphone")
        }

    def coefficients(self, omega: float) -> list[complex]:
        if omega <= 0:
            raise ScalingError("angular frequency must be positive")
        f = omega / (2.0 * math.pi)
        out = []
        for comp in self.components:
            if comp.kind.startswith("fluid"):
                blk = self.scene.blocks[comp.domain]
                props = fluid_properties(blk.medium, blk.damping, f)
                if comp.kind == "fluid-K":
                    out.append(1.0 / (props.rho * omega**2))
                else:
                    out.append(-1.0 / (props.rho * props.c**2))
            elif comp.kind == "shell-K":
                out.append(1.0 + 1j * self.scene.shells[comp.domain].solid.eta_s)
            elif comp.kind == "shell-M":
                out.append(-(omega**2))
            else:
                out.append(1.0)
        return out

    def matrix_data(self, omega: float) -> np.ndarray:
        data = np.zeros(self.indices.size, dtype=complex)
        for coef, comp in zip(self.coefficients(omega), self.components):
            data += coef * comp.data
        return data

    def assemble(self, omega: float) -> BlockSystem:
        A = sp.csr_matrix((self.matrix_data(omega), self.indices, self.indptr), shape=(self.n, self.n))
        b = self.b_unit * (1j * self.scene.Q_s / omega)
        return BlockSystem(A, b, omega, self.dofmap)


def assemble(scene: Scene, omega: float) -> BlockSystem:
    return Assembler(scene).assemble(omega)


def _csc_view(A: sp.csr_matrix) -> sp.csc_matrix:
    # for a symmetric matrix the CSR arrays are also valid CSC arrays
    return sp.csc_matrix((A.data, A.indices, A.indptr), shape=A.shape)


def default_backend() -> str:
    return "pardiso" if pardiso.available() else "superlu"


def _factorize(A: sp.csr_matrix, backend: str):
    if backend == "pardiso":
        try:
            return pardiso.PardisoFactor(A)
        except pardiso.PardisoError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
    if backend == "superlu":
        try:
            return spla.splu(_csc_view(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.1, options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
    if backend == "lu":
        try:
            return spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
    raise ValueError(f"unknown solver backend {backend!r}")


def equilibrate(A: sp.csr_matrix) -> np.ndarray:
    """Symmetric diagonal scaling d with d_i = |A_ii|^(-1/2) (1 where the diagonal vanishes)."""
    diag = np.abs(A.diagonal())
    d = np.ones(A.shape[0])
    nz = diag > 0
    d[nz] = 1.0 / np.sqrt(diag[nz])
    return d


def solve_direct(system: BlockSystem | tuple, backend: str | None = None) -> np.ndarray:
    """Sparse direct solve with a residual guard and iterative refinement.

    Backends: "pardiso" (MKL, complex symmetric LDL^T), "superlu" (symmetric
    mode) and "lu" (general SuperLU, valid for unsymmetric input). The matrix
    is equilibrated symmetrically first: pressure and shell rows differ by many
    orders of magnitude in the scaled formulation.
    """
    A, b = (system.A, system.b) if isinstance(system, BlockSystem) else system
    A = sp.csr_matrix(A, dtype=complex)
    b = np.asarray(b)
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros(A.shape[0], dtype=complex)
    d = equilibrate(A)
    D = sp.diags(d)
    fac = _factorize(sp.csr_matrix(D @ A @ D), backend or default_backend())

    def apply(rhs):
        return d * fac.solve(d * rhs)

    # the guard is applied to the equilibrated system, which is the one actually solved
    Db = d * b
    nb = np.linalg.norm(Db)
    x = apply(b.astype(complex))
    for _ in range(3):
        r = b - A @ x
        res = np.linalg.norm(d * r) / nb
        if not np.isfinite(res) or res <= RESIDUAL_TOL:
            break
        x = x + apply(r)
    else:
        res = np.linalg.norm(d * (b - A @ x)) / nb
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise SolverError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}; matrix is singular or ill-conditioned")
    return x


def solve_dense_oracle(system: BlockSystem | tuple) -> np.ndarray:
    """Dense LU with partial pivoting on the equilibrated matrix."""
    A, b = (system.A, system.b) if isinstance(system, BlockSystem) else system
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} unknowns, got {A.shape[0]}")
    dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    d = equilibrate(sp.csr_matrix(dense))
    scaled = d[:, None] * dense * d[None, :]
    return d * sla.lu_solve(sla.lu_factor(scaled), d * np.asarray(b))


# ---------------------------------------------------------------------------
# frequency sweep

_WORKER_ASSEMBLER: Assembler | None = None


def _init_worker(assembler: Assembler) -> None:
    global _WORKER_ASSEMBLER
    _WORKER_ASSEMBLER = assembler


def _solve_one(assembler: Assembler, f: float, snapshot: bool) -> FieldResult:
    try:
        sysm = assembler.assemble(2.0 * math.pi * f)
        x = solve_direct(sysm)
        p = {room: x[idx] for room, idx in assembler.mic_index.items()}
        return FieldResult(f, p, field=x if snapshot else None)
    except Exception as exc:  # recorded per frequency, the sweep goes on
        return FieldResult(f, {}, error=f"{type(exc).__name__}: {exc}")


def _worker_task(args) -> FieldResult:
    f, snapshot = args
    return _solve_one(_WORKER_ASSEMBLER, f, snapshot)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def sweep(
    scene: Scene | Assembler,
    frequencies: Sequence[float],
    workers: int | None = None,
    snapshot: bool = False,
    progress: bool = False,
) -> list[FieldResult]:
    """Independent solve per frequency; results follow the input order."""
    freqs = [float(f) for f in frequencies]
    if any(f <= 0 for f in freqs):
        raise ValueError("frequencies must be positive")
    assembler = scene if isinstance(scene, Assembler) else Assembler(scene)
    workers = default_workers() if workers is None else max(1, int(workers))
    t0 = time.perf_counter()

    def log(r: FieldResult, k: int):
        if progress:
            status = "ok" if r.ok else f"error ({r.error})"
            print(f"[{k}/{len(freqs)}] f={r.frequency:g} Hz {status} t={time.perf_counter() - t0:.1f}s", file=sys.stderr)

    out = []
    if workers == 1 or len(freqs) <= 1:
        for k, f in enumerate(freqs, 1):
            r = _solve_one(assembler, f, snapshot)
            log(r, k)
            out.append(r)
        return out
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(assembler,)) as ex:
        for k, r in enumerate(ex.map(_worker_task, [(f, snapshot) for f in freqs]), 1):
            log(r, k)
            out.append(r)
    return out


def frequency_banded_meshing(
    scene_for: Callable[[float], Scene], intervals: Sequence[tuple[float, float]]
) -> list[tuple[tuple[float, float], Scene]]:
    """One scene per frequency interval, each sized for the interval's upper frequency."""
    prev = None
    for lo, hi in intervals:
        if hi < lo or (prev is not None and lo != prev):
            raise ValueError("intervals must be increasing and contiguous")
        prev = hi
    return [((lo, hi), scene_for(hi)) for lo, hi in intervals]


def interval_frequencies(intervals: Sequence[tuple[float, float]], df: float = 1.0) -> list[np.ndarray]:
    """Frequency grid per interval, both ends included."""
    out = []
    for lo, hi in intervals:
        n = int(math.floor((hi - lo) / df + 1e-9))
        out.append(lo + df * np.arange(n + 1))
    return out


def write_narrowband_csv(results: Sequence[FieldResult], path: str | Path, mic_names: dict | None = None) -> None:
    """Columns f_Hz, mic_id, room, re_p, im_p; failed frequencies are skipped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f_Hz", "mic_id", "room", "re_p", "im_p"])
        for r in results:
            if not r.ok:
                continue
            for room in sorted(r.pressures):
                for j, p in enumerate(r.pressures[room]):
                    w.writerow([f"{r.frequency:g}", j + 1, room, repr(float(p.real)), repr(float(p.imag))])
