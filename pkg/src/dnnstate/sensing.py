"""Sensors, Riesz lifting and the orthonormal measurement space.

A sensor averages the P1 interpolant of a state at the four corners of a small
square of side ``delta`` around its center.  Lifting the functionals into the
truth space and orthonormalizing them gives the measurement space ``W``;
``w = C o`` are the sensor coordinates of an observation ``o``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import fem
from .errors import DependentSensorsError

DEFAULT_DELTA = 0.001


@dataclass(frozen=True, eq=False)
class SensorArray:
    centers: np.ndarray
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[0] < 1 or c.shape[1] != 2:
            raise ValueError("need at least one 2D sensor center")
        half = self.delta / 2
        if (c - half < 0).any() or (c + half > 1).any():
            raise ValueError("sensor averaging square leaves the unit square")
        object.__setattr__(self, "centers", c)

    @property
    def m(self):
        return self.centers.shape[0]

    def offset_points(self):
        """The four corner points of every sensor, shape ``(m, 4, 2)``."""
        half = self.delta / 2
        offsets = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
        return self.centers[:, None, :] + offsets[None]

    def subset(self, count):
        return SensorArray(self.centers[:count], self.delta)


def place_grid(k, delta=DEFAULT_DELTA):
    """``k x k`` sensors at ``(i / (k + 1), j / (k + 1))``."""
    t = np.arange(1, k + 1) / (k + 1)
    X, Y = np.meshgrid(t, t)
    return SensorArray(np.column_stack([X.ravel(), Y.ravel()]), delta)


def place_uniform(m, mesh=None, delta=DEFAULT_DELTA):
    """The two uniform layouts: 16 checkerboard cell centers or a 7x7 grid of spacing 1/8."""
    if m == 16:
        t = (2 * np.arange(1, 5) - 1) / 8
        X, Y = np.meshgrid(t, t)
        return SensorArray(np.column_stack([X.ravel(), Y.ravel()]), delta)
    if m == 49:
        return place_grid(7, delta)
    raise ValueError(f"uniform layout exists for m in (16, 49), got {m}; use place_grid")


def place_random(m, rng, delta=DEFAULT_DELTA, margin=0.05):
    if m < 1:
        raise ValueError("need at least one sensor")
    return SensorArray(rng.uniform(margin, 1 - margin, size=(m, 2)), delta)


def point_evaluation_matrix(mesh, points):
    """Sparse ``(len(points), N_h)`` matrix evaluating the P1 interpolant at points."""
    points = np.atleast_2d(points)
    n, h = mesh.n, mesh.h
    s = points[:, 0] / h
    t = points[:, 1] / h
    i = np.clip(np.floor(s).astype(int), 0, n - 1)
    j = np.clip(np.floor(t).astype(int), 0, n - 1)
    s, t = s - i, t - j
    sw = j * (n + 1) + i
    se, ne, nw = sw + 1, sw + n + 2, sw + n + 1
    lower = s >= t
    # barycentric weights on the lower (sw, se, ne) or upper (sw, ne, nw) triangle
    nodes = np.where(lower[:, None], np.column_stack([sw, se, ne]), np.column_stack([sw, ne, nw]))
    weights = np.where(
        lower[:, None],
        np.column_stack([1 - s, s - t, t]),
        np.column_stack([1 - t, s, t - s]),
    )
    rows = np.repeat(np.arange(points.shape[0]), 3)
    dof = mesh.interior_index[nodes.ravel()]
    keep = dof >= 0
    return sp.csr_matrix(
        (weights.ravel()[keep], (rows[keep], dof[keep])), shape=(points.shape[0], mesh.n_dofs)
    )


def functional_matrix(sensors, mesh):
    """Row ``i`` holds ``l_i`` applied to every nodal basis function."""
    pts = sensors.offset_points().reshape(-1, 2)
    E = point_evaluation_matrix(mesh, pts)
    avg = sp.kron(sp.eye(sensors.m), np.full((1, 4), 0.25), format="csr")
    return (avg @ E).tocsr()


def apply_functionals(sensors, mesh, u):
    """Observations ``o = l(u)``; ``u`` may be a stack of functions (rows)."""
    L = functional_matrix(sensors, mesh)
    return (L @ np.asarray(u).T).T


def riesz_lift(sensors, mesh, mode=fem.H1, tol=1e-12):
    """Riesz representers of the sensor functionals, shape ``(m, N_h)``."""
    L = functional_matrix(sensors, mesh)
    Q = fem.gram_matrix(mesh, mode)
    loads = L.toarray()
    return np.array([fem.solve_dirichlet(Q, load, tol=tol) for load in loads])


@dataclass(frozen=True, eq=False)
class MeasurementSpace:
    """Orthonormal sensor basis ``phi`` (rows) with ``phi = C @ lifts``."""

    phi: np.ndarray
    C: np.ndarray
    mode: str
    gram_residual: float
    mesh: object
    sensors: SensorArray

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def gram(self):
        return fem.gram_matrix(self.mesh, self.mode)

    def observe(self, u):
        return apply_functionals(self.sensors, self.mesh, u)

    def coords(self, u):
        """Sensor coordinates ``w = C l(u)`` of state(s) ``u``."""
        return measure_coords(self, self.observe(u))

    def synthesize(self, w):
        """``P_W u = Phi^T w`` from coordinates."""
        return np.asarray(w) @ self.phi


def orthonormalize(lifts, mesh, mode, sensors=None, method="cholesky", max_cond=1e12):
    """Orthonormalize Riesz representers in the ``mode`` inner product.

    ``method="cholesky"`` gives the lower-triangular change of basis
    ``C = L^{-1}`` with ``G = L L^T``.  ``method="svd"`` uses the symmetric
    eigendecomposition of the Gram matrix instead (``C`` is then full).
    """
    lifts = np.atleast_2d(lifts)
    Q = fem.gram_matrix(mesh, mode)
    G = lifts @ (Q @ lifts.T)
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 0 or ev[-1] / ev[0] > max_cond:
        raise DependentSensorsError(
            f"sensor Gram matrix is numerically singular (condition "
            f"{ev[-1] / max(ev[0], 1e-300):.2e}); sensor {_first_dependent(G, max_cond)} "
            "is dependent on the earlier ones",
            index=_first_dependent(G, max_cond),
        )
    if method == "cholesky":
        Lc = la.cholesky(G, lower=True)
        C = la.solve_triangular(Lc, np.eye(G.shape[0]), lower=True)
    elif method == "svd":
        lam, V = np.linalg.eigh(G)
        C = (V / np.sqrt(lam)).T
    else:
        raise ValueError(f"unknown orthonormalization method {method!r}")
    phi = C @ lifts
    resid = np.abs(phi @ (Q @ phi.T) - np.eye(phi.shape[0])).max()
    return MeasurementSpace(phi, C, mode, float(resid), mesh, sensors)


def _first_dependent(G, max_cond):
    for j in range(1, G.shape[0] + 1):
        ev = np.linalg.eigvalsh(G[:j, :j])
        if ev[0] <= 0 or ev[-1] / ev[0] > max_cond:
            return j - 1
    return G.shape[0] - 1


def build_measurement_space(sensors, mesh, mode=fem.H1, method="cholesky"):
    return orthonormalize(riesz_lift(sensors, mesh, mode), mesh, mode, sensors, method)


def measure_coords(space, o):
    """``w = C o`` for observation vector(s) ``o``."""
    return np.asarray(o) @ space.C.T


def project_complement(space, u):
    """``z = u - P_W u``; works on stacks of functions."""
    u = np.asarray(u, dtype=float)
    w = (space.gram @ u.T).T @ space.phi.T
    return u - w @ space.phi
