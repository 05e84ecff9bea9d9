"""Synthetic snapshots, POD of the complement space and training labels."""

import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import fem, fields
from .errors import DegenerateCoefficientError, FormatError, SolverError
from .sensing import measure_coords

PWC = "pwc"
LOG_NORMAL = "log-normal"
SCENARIOS = (PWC, LOG_NORMAL)


def snapshot_rng(master_seed, s, attempt=0):
    """Generator of snapshot ``s``: seeded with ``master_seed XOR s``."""
    seed = int(master_seed) ^ int(s)
    return np.random.default_rng(seed if attempt == 0 else [seed, attempt])


def sample_coefficient(scenario, mesh, rng, matern=None):
    """Draw a parameter and return ``(param, element coefficient)``."""
    if scenario == PWC:
        y = fields.sample_param_s1(rng)
        return y, fields.s1_element_values(y, mesh)
    if scenario == LOG_NORMAL:
        spec = matern or fields.MaternSpec()
        z = fields.sample_grf_circulant(spec, mesh, rng)
        return z, fields.s2_element_values(spec, z, mesh)
    raise ValueError(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")


def solve_snapshots(scenario, n_samples, mesh, master_seed, matern=None, tol=1e-10):
    """Parameters and truth solutions (``f = 1``) for ``n_samples`` draws.

    A failed draw is resampled once from a derived stream; a second failure
    is fatal.
    """
    f_vec = fem.load_vector(mesh, 1.0)
    params, sols = [], []
    for s in range(n_samples):
        for attempt in range(2):
            rng = snapshot_rng(master_seed, s, attempt)
            param, a = sample_coefficient(scenario, mesh, rng, matern)
            try:
                u = fem.solve_dirichlet(fem.assemble_stiffness(mesh, a), f_vec, tol)
                break
            except (DegenerateCoefficientError, SolverError) as exc:
                if attempt == 1:
                    raise
                warnings.warn(f"snapshot {s}: {exc}; resampling once")
        params.append(param)
        sols.append(u)
    return np.array(params), np.array(sols)


@dataclass(eq=False)
class SnapshotSet:
    scenario: str
    params: np.ndarray
    solutions: np.ndarray
    w: np.ndarray
    z: np.ndarray
    master_seed: int

    def __len__(self):
        return self.solutions.shape[0]

    @property
    def n_dofs(self):
        return self.solutions.shape[1]

    @property
    def m(self):
        return self.w.shape[1]


def measure_snapshots(space, solutions):
    """Sensor coordinates ``w = C l(u)`` and complements ``z = u - Phi^T w``."""
    w = measure_coords(space, space.observe(solutions))
    z = solutions - w @ space.phi
    return w, z


def generate_snapshots(scenario, n_samples, mesh, space, master_seed, matern=None):
    params, sols = solve_snapshots(scenario, n_samples, mesh, master_seed, matern)
    w, z = measure_snapshots(space, sols)
    return SnapshotSet(scenario, params, sols, w, z, int(master_seed))


@dataclass(eq=False)
class ComplementBasis:
    """``k`` orthonormal modes (rows of ``psi``) spanning the effective complement.

    ``singular_values`` holds the full retained-plus-discarded spectrum.
    """

    psi: np.ndarray
    singular_values: np.ndarray
    energy_kept: float
    mode: str

    @property
    def k(self):
        return self.psi.shape[0]


def weighted_spectrum(Z, Q):
    """Eigenpairs of the ``Q``-weighted snapshot correlation, largest first.

    Returns ``(lam, modes)`` where ``modes`` are ``Q``-orthonormal rows.  Uses the
    snapshot Gram matrix when there are fewer snapshots than DOFs and the
    spatial correlation ``R^T Z^T Z R`` (``Q = R R^T``) otherwise; both share the
    same nonzero spectrum.
    """
    N, n_dofs = Z.shape
    if N <= n_dofs:
        K = Z @ (Q @ Z.T)
        lam, V = la.eigh(0.5 * (K + K.T))
        lam, V = lam[::-1], V[:, ::-1]
        pos = lam > 0
        modes = np.zeros((lam.size, n_dofs))
        modes[pos] = (V[:, pos] / np.sqrt(lam[pos])).T @ Z
        return lam, modes
    R = la.cholesky(Q.toarray(), lower=True)
    B = Z @ R
    lam, V = la.eigh(B.T @ B)
    lam, V = lam[::-1], V[:, ::-1]
    modes = la.solve_triangular(R, V, lower=True, trans="T").T
    return lam, modes


def pod_complement(z, mesh, mode, energy=0.995, weighted=True, rank_tol=1e-12, k=None):
    """POD of complement snapshots in the ``mode`` inner product.

    Keeps the smallest ``k`` with cumulative eigenvalue energy at least
    ``energy`` (or exactly ``k`` modes when given).  ``weighted=False`` runs a
    plain Euclidean SVD of the coefficient vectors and orthonormalizes the
    retained left singular vectors in ``mode`` afterwards.
    """
    if k is None and not 0 < energy < 1:
        raise ValueError("energy must lie in (0, 1)")
    Z = np.atleast_2d(np.asarray(z, dtype=float))
    Q = fem.gram_matrix(mesh, mode)
    if weighted:
        lam, modes = weighted_spectrum(Z, Q)
    else:
        _, s, Vt = la.svd(Z, full_matrices=False)
        lam, modes = s**2, Vt
    lam = np.clip(lam, 0.0, None)
    if lam.size == 0 or lam[0] == 0.0:
        warnings.warn("all complement snapshots vanish; empty basis")
        return ComplementBasis(np.zeros((0, Z.shape[1])), np.sqrt(lam), 1.0, mode)
    lam = np.where(lam >= rank_tol * lam[0], lam, 0.0)
    total = lam.sum()
    cum = np.cumsum(lam) / total
    if k is None:
        k = int(np.searchsorted(cum, energy - 1e-15) + 1)
    k = min(k, int(np.count_nonzero(lam)))
    psi = modes[:k]
    if not weighted:
        G = psi @ (Q @ psi.T)
        psi = la.solve_triangular(la.cholesky(G, lower=True), psi, lower=True)
    kept = float(cum[k - 1]) if k > 0 else 0.0
    return ComplementBasis(psi, np.sqrt(lam), kept, mode)


def extract_labels(solutions, basis, mesh):
    """Label matrix ``c[s, i] = (u_s, psi_i)``."""
    Q = fem.gram_matrix(mesh, basis.mode)
    return np.asarray(solutions) @ (Q @ basis.psi.T)


def split_train_ghost(n_samples, n_ghost, rng):
    """Random disjoint ``(train_idx, ghost_idx)``, each sorted."""
    if not 0 < n_ghost < n_samples:
        raise ValueError(f"need 0 < n_ghost < N, got n_ghost={n_ghost}, N={n_samples}")
    perm = rng.permutation(n_samples)
    return np.sort(perm[n_ghost:]), np.sort(perm[:n_ghost])


# --- snapshot cache container -------------------------------------------------
#
# little endian; header = magic "PDES1", version u32, scenario tag u32, N u64,
# N_h u64, m u64, master_seed u64, param_dim u64; then float64 arrays params
# (N x param_dim), solutions (N x N_h), w (N x m), z (N x N_h).

CACHE_MAGIC = b"PDES1"
CACHE_VERSION = 1
_HEADER = struct.Struct("<5sIIQQQQQ")
_TAGS = {PWC: 1, LOG_NORMAL: 2}


def write_snapshots(path, snaps):
    N, n_dofs = snaps.solutions.shape
    params = np.asarray(snaps.params, dtype="<f8").reshape(N, -1)
    header = _HEADER.pack(
        CACHE_MAGIC, CACHE_VERSION, _TAGS[snaps.scenario], N, n_dofs, snaps.m,
        snaps.master_seed, params.shape[1],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (params, snaps.solutions, snaps.w, snaps.z):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, tag, N, n_dofs, m, seed, pdim = _HEADER.unpack(raw)
    if magic != CACHE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != CACHE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    scen = {v: k for k, v in _TAGS.items()}.get(tag)
    if scen is None:
        raise FormatError(f"{path}: unknown scenario tag {tag}")
    return dict(scenario=scen, n_samples=N, n_dofs=n_dofs, m=m, master_seed=seed, param_dim=pdim)


def read_snapshots(path):
    h = read_header(path)
    N, n_dofs, m, pdim = h["n_samples"], h["n_dofs"], h["m"], h["param_dim"]
    shapes = [(N, pdim), (N, n_dofs), (N, m), (N, n_dofs)]
    expected = _HEADER.size + 8 * sum(a * b for a, b in shapes)
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        raw = fh.read()
    if _HEADER.size + len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {_HEADER.size + len(raw)}")
    arrays, off = [], 0
    for shape in shapes:
        n = shape[0] * shape[1]
        arrays.append(np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape).astype(float))
        off += 8 * n
    params, sols, w, z = arrays
    return SnapshotSet(h["scenario"], params, sols, w, z, h["master_seed"])
