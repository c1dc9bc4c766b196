"""Element matrices: 27-node acoustic hexahedra and 9-node plane-shell quadrilaterals.

The shell is a flat superposition of a Mindlin plate (DSG shear interpolation), a
plane-stress membrane and a stabilised drilling rotation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .materials import SingularityError, SolidMedium

SHEAR_CORRECTION = 5.0 / 6.0
DRILLING_ALPHA = 1e-4

_NODES_1D = np.array([-1.0, 0.0, 1.0])


class GeometryError(ValueError):
    """Degenerate or inverted element geometry."""


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)


@lru_cache(maxsize=None)
def gauss_rule(order: int, dim: int = 1) -> QuadratureRule:
    if order < 1 or dim not in (1, 2, 3):
        raise ValueError("order >= 1 and dim in {1, 2, 3} required")
    x, w = np.polynomial.legendre.leggauss(order)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    # first coordinate varies fastest, matching the node ordering below
    pts = np.stack([g.transpose().ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.transpose().ravel() for g in wgrids], axis=1), axis=1)
    return QuadratureRule(pts, wts)


def lagrange3(x):
    """Quadratic Lagrange polynomials on nodes (-1, 0, 1) and their derivatives."""
    x = np.asarray(x, dtype=float)
    L = np.stack([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)], axis=-1)
    dL = np.stack([x - 0.5, -2.0 * x, x + 0.5], axis=-1)
    return L, dL


def quad9_shape(xi, eta):
    """Values (…, 9) and reference gradients (…, 9, 2); node a = i + 3 j."""
    Lx, dLx = lagrange3(xi)
    Ly, dLy = lagrange3(eta)
    N = (Ly[..., :, None] * Lx[..., None, :]).reshape(*np.shape(xi), 9)
    dN = np.stack(
        [
            (Ly[..., :, None] * dLx[..., None, :]).reshape(*np.shape(xi), 9),
            (dLy[..., :, None] * Lx[..., None, :]).reshape(*np.shape(xi), 9),
        ],
        axis=-1,
    )
    return N, dN


def hex27_shape(xi, eta, zeta):
    """Values (…, 27) and reference gradients (…, 27, 3); node a = i + 3 j + 9 k."""
    Lx, dLx = lagrange3(xi)
    Ly, dLy = lagrange3(eta)
    Lz, dLz = lagrange3(zeta)
    shp = np.shape(xi)

    def tp(a, b, c):
        return (c[..., :, None, None] * b[..., None, :, None] * a[..., None, None, :]).reshape(*shp, 27)

    N = tp(Lx, Ly, Lz)
    dN = np.stack([tp(dLx, Ly, Lz), tp(Lx, dLy, Lz), tp(Lx, Ly, dLz)], axis=-1)
    return N, dN


def hex27_reference_nodes() -> np.ndarray:
    k, j, i = np.meshgrid(_NODES_1D, _NODES_1D, _NODES_1D, indexing="ij")
    return np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)


def quad9_reference_nodes() -> np.ndarray:
    j, i = np.meshgrid(_NODES_1D, _NODES_1D, indexing="ij")
    return np.stack([i.ravel(), j.ravel()], axis=1)


# ---------------------------------------------------------------------------
# acoustic fluid


def fluid_element(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled acoustic stiffness (int grad N . grad N) and mass (int N N) of a hex27."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (27, 3):
        raise GeometryError("hex27 element needs 27 nodal coordinates")
    q = gauss_rule(3, 3)
    N, dN = hex27_shape(q.points[:, 0], q.points[:, 1], q.points[:, 2])
    J = np.einsum("gai,aj->gij", dN, coords)  # J[g, i, j] = dx_j / dxi_i
    detJ = np.linalg.det(J)
    if np.any(detJ <= 0):
        raise GeometryError("non-positive Jacobian in hex27 element")
    dNx = np.linalg.solve(J, dN.transpose(0, 2, 1)).transpose(0, 2, 1)
    w = q.weights * detJ
    K = np.einsum("g,gai,gbi->ab", w, dNx, dNx)
    M = np.einsum("g,ga,gb->ab", w, N, N)
    return 0.5 * (K + K.T), 0.5 * (M + M.T)


def boundary_admittance(
    face_coords: np.ndarray, Z_n: float | complex, rho0: float, c: float, omega: float
) -> np.ndarray:
    """Mixed boundary term (i k rho0 c / Z_n) int N N dGamma for a 9-node face.

    Returned unscaled; assembly applies the same 1/(rho omega^2) factor as the
    fluid stiffness.
    """
    if Z_n == 0:
        raise SingularityError("zero impedance is a pressure-release boundary, not an admittance")
    Nn, area_w = _face_mass(np.asarray(face_coords, dtype=float))
    if np.isinf(abs(Z_n)):
        return np.zeros((9, 9), dtype=complex)
    k = omega / c
    return (1j * k * rho0 * c / Z_n) * Nn


def _face_mass(coords: np.ndarray) -> tuple[np.ndarray, float]:
    q = gauss_rule(3, 2)
    N, dN = quad9_shape(q.points[:, 0], q.points[:, 1])
    t = np.einsum("gai,aj->gij", dN, coords)  # tangents, (g, 2, 3)
    dA = np.linalg.norm(np.cross(t[:, 0], t[:, 1]), axis=1)
    if np.any(dA <= 0):
        raise GeometryError("degenerate face")
    w = q.weights * dA
    return np.einsum("g,ga,gb->ab", w, N, N), float(w.sum())


# ---------------------------------------------------------------------------
# plane shell


@dataclass
class ShellElementMatrices:
    """Local-frame matrices in block order plate (w, phi1, phi2 per node),
    membrane (u1, u2 per node), drilling (phi3 per node)."""

    K: np.ndarray
    M: np.ndarray
    frame: np.ndarray  # rows: local axes e1, e2, e3 in global coordinates

    @property
    def plate(self) -> slice:
        return slice(0, 27)

    @property
    def membrane(self) -> slice:
        return slice(27, 45)

    @property
    def drilling(self) -> slice:
        return slice(45, 54)


def local_frame(coords: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal frame of a flat 9-node element and in-plane nodal coordinates."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (9, 3):
        raise GeometryError("quad9 element needs 9 nodal coordinates")
    _, dN = quad9_shape(np.array(0.0), np.array(0.0))
    t1, t2 = dN.T @ coords
    n = np.cross(t1, t2)
    if np.linalg.norm(n) <= tol * max(np.linalg.norm(t1) * np.linalg.norm(t2), 1e-300):
        raise GeometryError("degenerate shell element")
    e3 = n / np.linalg.norm(n)
    e1 = t1 / np.linalg.norm(t1)
    e2 = np.cross(e3, e1)
    R = np.stack([e1, e2, e3])
    rel = coords - coords[4]
    out_of_plane = rel @ e3
    size = np.ptp(coords, axis=0).max()
    if np.abs(out_of_plane).max() > 1e-8 * size:
        raise GeometryError("shell element is not flat")
    return R, rel @ R[:2].T


def _plane_kinematics(xy: np.ndarray, pts: np.ndarray):
    N, dN = quad9_shape(pts[:, 0], pts[:, 1])
    J = np.einsum("gai,aj->gij", dN, xy)
    detJ = np.linalg.det(J)
    if np.any(detJ <= 0):
        raise GeometryError("non-positive Jacobian in shell element")
    dNx = np.linalg.solve(J, dN.transpose(0, 2, 1)).transpose(0, 2, 1)
    return N, dN, dNx, J, detJ


def membrane_strain_operator(dNx: np.ndarray) -> np.ndarray:
    """(g, 3, 18) operator for (eps11, eps22, gamma12) from (u1, u2) per node."""
    g = dNx.shape[0]
    B = np.zeros((g, 3, 18))
    B[:, 0, 0::2] = dNx[:, :, 0]
    B[:, 1, 1::2] = dNx[:, :, 1]
    B[:, 2, 0::2] = dNx[:, :, 1]
    B[:, 2, 1::2] = dNx[:, :, 0]
    return B


def bending_strain_operator(dNx: np.ndarray) -> np.ndarray:
    """(g, 3, 27) curvature operator (phi1,1; phi2,2; phi1,2 + phi2,1)."""
    g = dNx.shape[0]
    B = np.zeros((g, 3, 27))
    B[:, 0, 1::3] = dNx[:, :, 0]
    B[:, 1, 2::3] = dNx[:, :, 1]
    B[:, 2, 1::3] = dNx[:, :, 1]
    B[:, 2, 2::3] = dNx[:, :, 0]
    return B


def shear_strain_operator_standard(N: np.ndarray, dNx: np.ndarray) -> np.ndarray:
    """(g, 2, 27) operator for (w,1 + phi1; w,2 + phi2) from plain interpolation."""
    g = N.shape[0]
    B = np.zeros((g, 2, 27))
    B[:, 0, 0::3] = dNx[:, :, 0]
    B[:, 1, 0::3] = dNx[:, :, 1]
    B[:, 0, 1::3] = N
    B[:, 1, 2::3] = N
    return B


def _gap_integrals(xy: np.ndarray) -> np.ndarray:
    """Line integrals of the covariant rotation from the edge xi=-1 (eta=-1) to each node.

    G[d, K, L, c] = int_{-1}^{s_K} N_L * dx_c/ds ds along direction d through node K,
    with s the natural coordinate of direction d (d = 0: xi, d = 1: eta).
    """
    ref = quad9_reference_nodes()
    gx, gw = np.polynomial.legendre.leggauss(3)
    G = np.zeros((2, 9, 9, 2))
    for d in range(2):
        for K in range(9):
            s_end = ref[K, d]
            if s_end == -1.0:
                continue
            half = 0.5 * (s_end + 1.0)
            s = -1.0 + half * (gx + 1.0)
            pts = np.empty((3, 2))
            pts[:, d] = s
            pts[:, 1 - d] = ref[K, 1 - d]
            N, dN = quad9_shape(pts[:, 0], pts[:, 1])
            tangent = dN[:, :, d] @ xy  # (3, 2) = dx_c / ds
            G[d, K] = np.einsum("g,gl,gc->lc", gw * half, N, tangent)
    return G


def shear_strain_operator_dsg(xy: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """(g, 2, 27) Cartesian shear strains from nodal shear gaps interpolated with the
    element's own shape functions."""
    N, dN, dNx, J, _ = _plane_kinematics(xy, pts)
    G = _gap_integrals(xy)
    g = pts.shape[0]
    Bn = np.zeros((g, 2, 27))
    for d in range(2):
        # deflection part of the gap interpolation collapses to w,s exactly
        Bn[:, d, 0::3] = dN[:, :, d]
        # rotation part: sum_K dN_K/ds * G[d, K, L, c]
        rot = np.einsum("gk,klc->glc", dN[:, :, d], G[d])
        Bn[:, d, 1::3] = rot[:, :, 0]
        Bn[:, d, 2::3] = rot[:, :, 1]
    # covariant -> Cartesian: gamma_nat = J gamma_cart
    return np.linalg.solve(J, Bn)


def plate_matrices(xy: np.ndarray, solid: SolidMedium, h: float, dsg: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Plate stiffness at real E and consistent mass (with rotary inertia), 27x27 each."""
    q = gauss_rule(3, 2)
    N, _, dNx, _, detJ = _plane_kinematics(xy, q.points)
    w = q.weights * detJ
    nu = solid.nu
    Db = solid.bending_stiffness(h) * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
    Ds = SHEAR_CORRECTION * solid.G * h
    Bb = bending_strain_operator(dNx)
    Bs = shear_strain_operator_dsg(xy, q.points) if dsg else shear_strain_operator_standard(N, dNx)
    K = np.einsum("g,gia,ij,gjb->ab", w, Bb, Db, Bb) + Ds * np.einsum("g,gia,gib->ab", w, Bs, Bs)
    NN = np.einsum("g,ga,gb->ab", w, N, N)
    I = h**3 / 12.0
    M = np.zeros((27, 27))
    M[0::3, 0::3] = solid.rho * h * NN
    M[1::3, 1::3] = solid.rho * I * NN
    M[2::3, 2::3] = solid.rho * I * NN
    return 0.5 * (K + K.T), M


def membrane_matrices(xy: np.ndarray, solid: SolidMedium, h: float) -> tuple[np.ndarray, np.ndarray]:
    q = gauss_rule(3, 2)
    N, _, dNx, _, detJ = _plane_kinematics(xy, q.points)
    w = q.weights * detJ
    nu = solid.nu
    Dm = solid.E * h / (1.0 - nu**2) * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
    Bm = membrane_strain_operator(dNx)
    K = np.einsum("g,gia,ij,gjb->ab", w, Bm, Dm, Bm)
    NN = solid.rho * h * np.einsum("g,ga,gb->ab", w, N, N)
    M = np.zeros((18, 18))
    M[0::2, 0::2] = NN
    M[1::2, 1::2] = NN
    return 0.5 * (K + K.T), M


def shell_element(
    coords: np.ndarray,
    solid: SolidMedium,
    h: float,
    *,
    dsg: bool = True,
    drilling_alpha: float = DRILLING_ALPHA,
    complex_modulus: bool = True,
) -> ShellElementMatrices:
    """Local 54x54 shell matrices. The stiffness carries E(1 + i eta_s) unless
    ``complex_modulus`` is False (then the real-E stiffness is returned)."""
    if h <= 0:
        raise GeometryError("shell thickness must be positive")
    R, xy = local_frame(coords)
    Kp, Mp = plate_matrices(xy, solid, h, dsg=dsg)
    Km, Mm = membrane_matrices(xy, solid, h)
    rot = np.r_[1:27:3, 2:27:3]
    k_drill = drilling_alpha * np.mean(np.diag(Kp)[rot])
    m_drill = drilling_alpha * np.mean(np.diag(Mp)[rot])
    K = np.zeros((54, 54))
    M = np.zeros((54, 54))
    K[:27, :27], M[:27, :27] = Kp, Mp
    K[27:45, 27:45], M[27:45, 27:45] = Km, Mm
    K[45:, 45:] = k_drill * np.eye(9)
    M[45:, 45:] = m_drill * np.eye(9)
    if complex_modulus:
        K = K * (1.0 + 1j * solid.eta_s)
    return ShellElementMatrices(K, M, R)


@lru_cache(maxsize=None)
def nodal_dof_permutation() -> np.ndarray:
    """Signed map from nodal 6-DOF vectors (u1, u2, u3, th1, th2, th3) to block order.

    Returns P (54x54) with q_block = P q_nodal. Rotation-vector components relate
    to the plate rotations by th1 = -phi2, th2 = phi1, th3 = phi3.
    """
    P = np.zeros((54, 54))
    for a in range(9):
        n = 6 * a
        P[3 * a, n + 2] = 1.0  # w = u3
        P[3 * a + 1, n + 4] = 1.0  # phi1 = th2
        P[3 * a + 2, n + 3] = -1.0  # phi2 = -th1
        P[27 + 2 * a, n + 0] = 1.0
        P[27 + 2 * a + 1, n + 1] = 1.0
        P[45 + a, n + 5] = 1.0
    return P


def to_nodal_dofs(A_block: np.ndarray) -> np.ndarray:
    P = nodal_dof_permutation()
    return P.T @ A_block @ P


def transform_to_global(A_local: np.ndarray, R: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Congruence T^T A T with T = blockdiag(R, R) per node; A in nodal 6-DOF order.

    ``R`` holds the local axes as rows (local = R @ global).
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=tol):
        raise ValueError("rotation must be orthonormal")
    n = A_local.shape[0]
    if n % 6:
        raise ValueError("matrix size must be a multiple of 6")
    T = np.kron(np.eye(n // 3), R)
    return T.T @ A_local @ T


def shell_element_global(coords, solid, h, **kw) -> tuple[np.ndarray, np.ndarray]:
    """Shell matrices in global nodal 6-DOF order (u_x, u_y, u_z, th_x, th_y, th_z per node)."""
    e = shell_element(coords, solid, h, **kw)
    return (
        transform_to_global(to_nodal_dofs(e.K), e.frame),
        transform_to_global(to_nodal_dofs(e.M), e.frame),
    )
