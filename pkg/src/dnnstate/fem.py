"""Piecewise linear finite elements on a uniform triangulation of the unit square.

All states live in the interior nodal space: a P1 function is stored as the
vector of its values at the ``(n - 1)**2`` interior nodes, with a homogeneous
Dirichlet trace implied.  Matrices are ``scipy.sparse.csr_matrix``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import DegenerateCoefficientError, SolverError

H1 = "H1"
L2 = "L2"
MODES = (H1, L2)

# P1 mass matrix on a triangle of unit area
_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Friedrichs-Keller triangulation of ``[0, 1]^2`` with ``n`` cells per side.

    Node ``j * (n + 1) + i`` sits at ``(i * h, j * h)``.  Each square cell is cut
    along its south-west to north-east diagonal into two counter-clockwise
    triangles.  ``interior_index[node]`` is the DOF index of an interior node and
    ``-1`` on the boundary.
    """

    n: int
    nodes: np.ndarray
    elements: np.ndarray
    interior_index: np.ndarray
    h: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_dofs(self):
        return (self.n - 1) ** 2

    @cached_property
    def interior_nodes(self):
        return np.flatnonzero(self.interior_index >= 0)

    @cached_property
    def barycenters(self):
        return self.nodes[self.elements].mean(axis=1)

    @cached_property
    def areas(self):
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def _gradients(self):
        # gradients of the three barycentric coordinates, shape (n_el, 3, 2)
        p = self.nodes[self.elements]
        x, y = p[..., 0], p[..., 1]
        two_area = 2.0 * self.areas
        gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        return np.stack([gx, gy], axis=-1) / two_area[:, None, None]

    @cached_property
    def _stiffness_pattern(self):
        """Map from per-element coefficients to CSR data of the interior stiffness.

        Returns ``(E, indices, indptr)`` with ``A.data = E @ a_elem``.
        """
        grads = self._gradients
        local = np.einsum("eid,ejd->eij", grads, grads) * self.areas[:, None, None]
        return self._pattern(local)

    def _pattern(self, local):
        rows = np.repeat(self.elements, 3, axis=1)
        cols = np.tile(self.elements, (1, 3))
        vals = local.reshape(self.n_elements, 9)
        elem = np.repeat(np.arange(self.n_elements), 9)
        ri = self.interior_index[rows.ravel()]
        ci = self.interior_index[cols.ravel()]
        keep = (ri >= 0) & (ci >= 0)
        ri, ci, vals, elem = ri[keep], ci[keep], vals.ravel()[keep], elem[keep]
        # the position of every (row, col) pair inside the CSR structure
        key = ri.astype(np.int64) * self.n_dofs + ci
        uniq, slot = np.unique(key, return_inverse=True)
        E = sp.csr_matrix((vals, (slot, elem)), shape=(uniq.size, self.n_elements))
        urow, ucol = np.divmod(uniq, self.n_dofs)
        indptr = np.zeros(self.n_dofs + 1, dtype=np.int64)
        np.add.at(indptr, urow + 1, 1)
        return E, ucol.astype(np.int32), np.cumsum(indptr).astype(np.int32)

    def to_full(self, u):
        """Nodal values on all ``(n + 1)**2`` nodes, zero on the boundary."""
        u = np.asarray(u)
        out = np.zeros(u.shape[:-1] + (self.n_nodes,))
        out[..., self.interior_nodes] = u
        return out

    def interpolate(self, func):
        """Interior nodal interpolant of ``func(x1, x2)``."""
        p = self.nodes[self.interior_nodes]
        return np.asarray(func(p[:, 0], p[:, 1]), dtype=float)


def build_mesh(n):
    """Uniform triangulation with ``(n + 1)**2`` nodes and ``2 n**2`` triangles."""
    if int(n) != n or n < 2:
        raise ValueError(f"mesh needs n >= 2 subdivisions, got {n!r}")
    n = int(n)
    h = 1.0 / n
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    sw = (j * (n + 1) + i).ravel()
    se, ne, nw = sw + 1, sw + n + 2, sw + n + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    ii, jj = np.divmod(np.arange(nodes.shape[0]), n + 1)[::-1]
    interior = (ii > 0) & (ii < n) & (jj > 0) & (jj < n)
    interior_index = np.full(nodes.shape[0], -1, dtype=np.int64)
    interior_index[interior] = np.arange(interior.sum())
    return TriMesh(n, nodes, elements, interior_index, h)


def assemble_stiffness(mesh, a_elem):
    """Interior stiffness matrix for the diffusion coefficient ``a_elem``.

    ``a_elem`` holds one value per element (the coefficient at the barycenter).
    """
    a_elem = np.broadcast_to(np.asarray(a_elem, dtype=float), (mesh.n_elements,))
    bad = ~(a_elem > 0)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise DegenerateCoefficientError(
            f"diffusion coefficient must be positive, element {first} has {a_elem[first]!r}"
        )
    E, indices, indptr = mesh._stiffness_pattern
    return sp.csr_matrix((E @ a_elem, indices, indptr), shape=(mesh.n_dofs, mesh.n_dofs))


def assemble_mass(mesh, full=False):
    """Consistent P1 mass matrix; ``full=True`` keeps boundary nodes."""
    local = mesh.areas[:, None, None] * _LOCAL_MASS
    if full:
        rows = np.repeat(mesh.elements, 3, axis=1).ravel()
        cols = np.tile(mesh.elements, (1, 3)).ravel()
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)
    E, indices, indptr = mesh._pattern(local)
    data = np.asarray(E.sum(axis=1)).ravel()
    return sp.csr_matrix((data, indices, indptr), shape=(mesh.n_dofs, mesh.n_dofs))


def load_vector(mesh, f=1.0):
    """Load vector of a piecewise constant source (one value per element, or scalar)."""
    f = np.broadcast_to(np.asarray(f, dtype=float), (mesh.n_elements,))
    contrib = np.repeat((f * mesh.areas / 3.0)[:, None], 3, axis=1)
    full = np.bincount(mesh.elements.ravel(), contrib.ravel(), minlength=mesh.n_nodes)
    return full[mesh.interior_nodes]


def solve_dirichlet(A, f_vec, tol=1e-10, x0=None):
    """Unpreconditioned conjugate gradients for ``A u = f_vec``.

    Raises
    ------
    SolverError
        If the relative residual is still above ``tol`` after ``10 * N_h``
        iterations.
    """
    f_vec = np.asarray(f_vec, dtype=float)
    norm_f = np.linalg.norm(f_vec)
    if norm_f == 0.0:
        return np.zeros_like(f_vec)
    maxiter = 10 * f_vec.size
    u, _ = cg(A, f_vec, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter)
    residual = np.linalg.norm(A @ u - f_vec) / norm_f
    # cg checks a recursively updated residual; allow rounding slack on the true one
    if not residual <= 10 * tol:
        raise SolverError(f"CG did not converge: relative residual {residual:.3e}", residual)
    return u


def gram_matrix(mesh, mode):
    """Inner-product matrix of the interior space: unit stiffness (H1) or mass (L2)."""
    if mode not in MODES:
        raise ValueError(f"unknown inner-product mode {mode!r}, expected one of {MODES}")
    cache = mesh._cache
    if mode not in cache:
        if mode == H1:
            cache[mode] = assemble_stiffness(mesh, 1.0)
        else:
            cache[mode] = assemble_mass(mesh)
    return cache[mode]


def _check_length(mesh, *arrays):
    for a in arrays:
        if np.shape(a)[-1] != mesh.n_dofs:
            raise ValueError(
                f"function has {np.shape(a)[-1]} coefficients, mesh has {mesh.n_dofs} DOFs"
            )


def inner_product(mesh, u, v, mode=H1):
    """``(u, v)`` in the H1 seminorm or in L2."""
    _check_length(mesh, u, v)
    return float(np.dot(u, gram_matrix(mesh, mode) @ v))


def norm(mesh, u, mode=H1):
    """Norm of ``u``; a stack of functions (rows) gives a vector of norms."""
    _check_length(mesh, u)
    u = np.asarray(u, dtype=float)
    Qu = (gram_matrix(mesh, mode) @ u.T).T
    return np.sqrt(np.maximum(np.sum(u * Qu, axis=-1), 0.0))
