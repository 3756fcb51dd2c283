"""Linear-element meshes and operators with homogeneous Neumann conditions.

Supplies 1D interval meshes and structured triangulations of the rectangle
(-L, L) x (-sqrt(3)L/2, sqrt(3)L/2), together with the consistent mass
matrix M and the weak Neumann Laplacian K (K = -stiffness, so K*const = 0
and K is symmetric negative semidefinite).

Operators also carry element quadrature data (2-point Gauss on intervals,
edge-midpoint rule on triangles) used for Galerkin assembly of nonlinear
reaction terms.  Both rules integrate products of two basis functions
exactly, which keeps reaction-mass blocks consistent with M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidArgumentError

ROOT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class Mesh:
    """Nodal mesh: intervals in 1D, triangles in 2D.

    Attributes
    ----------
    dimension : 1 or 2
    nodes : (n,) array in 1D, (n, 2) array in 2D
    elements : (ne, 2) or (ne, 3) integer connectivity
    """

    dimension: int
    nodes: np.ndarray
    elements: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates as an (n, dim) array (1D nodes get a column)."""
        if self.dimension == 1:
            return self.nodes[:, None]
        return self.nodes


@dataclass(frozen=True)
class Operators:
    """Assembled operators and quadrature tables for one mesh.

    M : consistent mass matrix (CSR), SPD, entries sum to |Omega|
    K : weak Neumann Laplacian (CSR), symmetric negative semidefinite
    volume : |Omega|
    lumped : row sums of M (nodal volumes)
    qelems/qweights/qbasis : element connectivity, quadrature weights
        (already including element measure) and basis values at the
        quadrature points, shared by all elements.
    """

    mesh: Mesh
    M: sp.csr_matrix
    K: sp.csr_matrix
    volume: float
    lumped: np.ndarray
    qelems: np.ndarray = field(repr=False)
    qweights: np.ndarray = field(repr=False)
    qbasis: np.ndarray = field(repr=False)
    _asm_rows: np.ndarray = field(repr=False)
    _asm_cols: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.mesh.n

    def coeff_mass(self, coef_at_quad: np.ndarray) -> sp.csr_matrix:
        """Assemble the weighted mass matrix int coef(x) phi_i phi_j dx.

        ``coef_at_quad`` has shape (ne, nq): the coefficient evaluated at
        the quadrature points (see :func:`at_quad`).
        """
        data = np.einsum("eq,qa,qb->eab", self.qweights * coef_at_quad,
                         self.qbasis, self.qbasis)
        A = sp.coo_matrix((data.ravel(), (self._asm_rows, self._asm_cols)),
                          shape=(self.n, self.n))
        return A.tocsr()

    def load_vector(self, coef_at_quad: np.ndarray) -> np.ndarray:
        """Assemble the weak load int coef(x) phi_i dx as a nodal vector."""
        contrib = np.einsum("eq,qa->ea", self.qweights * coef_at_quad, self.qbasis)
        return np.bincount(self.qelems.ravel(), weights=contrib.ravel(),
                           minlength=self.n)

    def at_quad(self, nodal: np.ndarray) -> np.ndarray:
        """Interpolate a nodal field to the quadrature points, shape (ne, nq)."""
        return nodal[self.qelems] @ self.qbasis.T


def build_interval_mesh(L: float, n_el: int) -> Mesh:
    """Equispaced interval mesh on [-L, L] with ``n_el`` elements."""
    if L <= 0:
        raise InvalidArgumentError(f"half-length L must be positive, got {L}")
    if n_el < 1:
        raise InvalidArgumentError(f"need at least one element, got {n_el}")
    nodes = np.linspace(-L, L, n_el + 1)
    elements = np.column_stack([np.arange(n_el), np.arange(n_el) + 1])
    return Mesh(dimension=1, nodes=nodes, elements=elements.astype(np.int64))


def build_rect_mesh(L: float, nx: int, ny: int) -> Mesh:
    """Structured triangulation of (-L, L) x (-sqrt(3)L/2, sqrt(3)L/2).

    Each grid cell is split by one diagonal; the diagonal direction is
    chosen per cell so that the triangulation is mirror symmetric about
    both axes whenever nx and ny are even (useful for clean pitchforks).
    Node count is (nx+1) * (ny+1).
    """
    if L <= 0:
        raise InvalidArgumentError(f"half-length L must be positive, got {L}")
    if nx < 1 or ny < 1:
        raise InvalidArgumentError(f"need nx, ny >= 1, got ({nx}, {ny})")
    Ly = ROOT3 * L / 2.0
    xs = np.linspace(-L, L, nx + 1)
    ys = np.linspace(-Ly, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            xc = 0.5 * (xs[i] + xs[i + 1])
            yc = 0.5 * (ys[j] + ys[j + 1])
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if xc * yc >= 0.0:
                tris.append((a, b, c))
                tris.append((a, c, d))
            else:
                tris.append((a, b, d))
                tris.append((b, c, d))
    return Mesh(dimension=2, nodes=nodes, elements=np.asarray(tris, dtype=np.int64))


def _interval_tables(mesh: Mesh):
    x = mesh.nodes
    el = mesh.elements
    h = x[el[:, 1]] - x[el[:, 0]]
    if np.any(h <= 0):
        raise AssemblyError(int(np.argmax(h <= 0)), float(h.min()))
    # element mass h/6*[[2,1],[1,2]], stiffness 1/h*[[1,-1],[-1,1]]
    mloc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    aloc = np.array([[1.0, -1.0], [-1.0, 1.0]])
    Mdat = h[:, None, None] * mloc
    Adat = (1.0 / h)[:, None, None] * aloc
    # 2-point Gauss on the reference interval [0, 1]
    gp = np.array([0.5 - 0.5 / ROOT3, 0.5 + 0.5 / ROOT3])
    qbasis = np.column_stack([1.0 - gp, gp])
    qweights = np.outer(h, [0.5, 0.5])
    return Mdat, Adat, qweights, qbasis, float(np.sum(h))


def _triangle_tables(mesh: Mesh):
    pts = mesh.nodes
    el = mesh.elements
    p1, p2, p3 = pts[el[:, 0]], pts[el[:, 1]], pts[el[:, 2]]
    d21, d31 = p2 - p1, p3 - p1
    detJ = d21[:, 0] * d31[:, 1] - d21[:, 1] * d31[:, 0]
    if np.any(detJ <= 0):
        bad = int(np.argmax(detJ <= 0))
        raise AssemblyError(bad, float(detJ[bad] / 2.0))
    area = detJ / 2.0
    # gradients of the barycentric basis
    g1 = np.column_stack([p2[:, 1] - p3[:, 1], p3[:, 0] - p2[:, 0]]) / detJ[:, None]
    g2 = np.column_stack([p3[:, 1] - p1[:, 1], p1[:, 0] - p3[:, 0]]) / detJ[:, None]
    g3 = np.column_stack([p1[:, 1] - p2[:, 1], p2[:, 0] - p1[:, 0]]) / detJ[:, None]
    grads = np.stack([g1, g2, g3], axis=1)  # (ne, 3, 2)
    Adat = np.einsum("ead,ebd,e->eab", grads, grads, area)
    mloc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Mdat = area[:, None, None] * mloc
    # edge-midpoint rule: exact for quadratics
    qbasis = np.array([[0.5, 0.5, 0.0],
                       [0.0, 0.5, 0.5],
                       [0.5, 0.0, 0.5]])
    qweights = np.outer(area, [1.0 / 3.0] * 3)
    return Mdat, Adat, qweights, qbasis, float(np.sum(area))


def assemble_operators(mesh: Mesh) -> Operators:
    """Assemble M, K and quadrature tables for a mesh."""
    if mesh.dimension == 1:
        Mdat, Adat, qweights, qbasis, volume = _interval_tables(mesh)
    elif mesh.dimension == 2:
        Mdat, Adat, qweights, qbasis, volume = _triangle_tables(mesh)
    else:
        raise InvalidArgumentError(f"unsupported dimension {mesh.dimension}")
    el = mesh.elements
    nv = el.shape[1]
    rows = np.repeat(el, nv, axis=1).ravel()
    cols = np.tile(el, (1, nv)).ravel()
    n = mesh.n
    M = sp.coo_matrix((Mdat.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A = sp.coo_matrix((Adat.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    lumped = np.asarray(M.sum(axis=1)).ravel()
    return Operators(mesh=mesh, M=M, K=(-A).tocsr(), volume=volume,
                     lumped=lumped, qelems=el, qweights=qweights,
                     qbasis=qbasis, _asm_rows=rows, _asm_cols=cols)


def average(field: np.ndarray, ops: Operators) -> float:
    """Spatial average (1/|Omega|) int field dx of a nodal field."""
    field = np.asarray(field, dtype=float)
    if field.shape != (ops.n,):
        raise InvalidArgumentError(
            f"field has length {field.shape}, expected ({ops.n},)")
    return float(ops.lumped @ field / ops.volume)


def save_mesh(mesh: Mesh, path) -> None:
    """Write a mesh as plain text: node records, then element records."""
    with open(path, "w") as fh:
        fh.write(f"dim {mesh.dimension} nodes {mesh.n} "
                 f"elements {mesh.elements.shape[0]}\n")
        for row in np.atleast_2d(mesh.coords):
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        for row in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_mesh(path) -> Mesh:
    """Read a mesh written by :func:`save_mesh`."""
    with open(path) as fh:
        header = fh.readline().split()
        dim, n, ne = int(header[1]), int(header[3]), int(header[5])
        nodes = np.array([[float(v) for v in fh.readline().split()]
                          for _ in range(n)])
        elements = np.array([[int(v) for v in fh.readline().split()]
                             for _ in range(ne)], dtype=np.int64)
    if dim == 1:
        nodes = nodes.ravel()
    return Mesh(dimension=dim, nodes=nodes, elements=elements)
