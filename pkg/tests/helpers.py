"""Shared helpers: a static Mindlin plate solver on the plate block alone."""
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from stlsim.elements import gauss_rule, plate_matrices, quad9_reference_nodes, quad9_shape
from stlsim.materials import SolidMedium
from stlsim.mesh import _grid_connectivity_2d

# centre deflection of a clamped square plate under uniform load, w = coeff q a^4 / D
CLAMPED_SQUARE_COEFF = 0.00126532


def clamped_plate_deflection_ratio(n: int, dsg: bool, a: float = 1.0, h: float = 0.01) -> float:
    """Centre deflection on an n x n mesh divided by the series solution."""
    solid = SolidMedium(1e9, 0.3, 1000.0)
    he = a / n
    xy = (quad9_reference_nodes() + 1.0) / 2.0 * he
    K, _ = plate_matrices(xy, solid, h, dsg=dsg)
    q = gauss_rule(3, 2)
    N, _ = quad9_shape(q.points[:, 0], q.points[:, 1])
    fe = np.zeros(27)
    fe[0::3] = (q.weights * (he / 2) ** 2) @ N
    conn = _grid_connectivity_2d((n, n))
    n_nodes = (2 * n + 1) ** 2
    d = (3 * conn[:, :, None] + np.arange(3)).reshape(len(conn), -1)
    rows = np.repeat(d, 27, 1).ravel()
    cols = np.tile(d, (1, 27)).ravel()
    A = sp.coo_matrix((np.tile(K.ravel(), len(conn)), (rows, cols)), shape=(3 * n_nodes,) * 2).tocsr()
    f = np.zeros(3 * n_nodes)
    np.add.at(f, d.ravel(), np.tile(fe, len(conn)))
    g = np.arange(n_nodes).reshape(2 * n + 1, 2 * n + 1)
    edge = np.zeros(g.shape, bool)
    edge[0] = edge[-1] = edge[:, 0] = edge[:, -1] = True
    fixed = (3 * g[edge][:, None] + np.arange(3)).ravel()
    free = np.setdiff1d(np.arange(3 * n_nodes), fixed)
    u = np.zeros(3 * n_nodes)
    u[free] = spla.spsolve(A[free][:, free].tocsc(), f[free])
    D = solid.bending_stiffness(h)
    return u[3 * g[n, n]] / (CLAMPED_SQUARE_COEFF * a**4 / D)
