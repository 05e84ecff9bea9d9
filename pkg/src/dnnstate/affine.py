"""Affine (one-space) recovery baseline built on a POD reduced space.

Given an affine space ``ubar + span(xi_1..xi_n)`` and the measurement space
``W``, the estimate is the element consistent with the data that is closest
to the affine space.  It is computed by a least-squares fit of the reduced
coordinates to the data followed by a correction in ``W``.  Its accuracy is
governed by ``mu = 1 / sigma_min`` of the cross-Gramian ``(xi_i, phi_j)``.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import fem
from .errors import UnrecoverableSpaceError
from .reduction import weighted_spectrum

SIGMA_MIN_TOL = 1e-12
COMPARE_COLUMNS = ("method", "m", "n", "mu", "max_h1", "mean_h1")


@dataclass(eq=False)
class AffineSpace:
    """Offset ``ubar`` and ``mode``-orthonormal basis rows ``xi``."""

    ubar: np.ndarray
    xi: np.ndarray
    mode: str

    @property
    def n(self):
        return self.xi.shape[0]

    def truncate(self, n):
        return AffineSpace(self.ubar, self.xi[:n], self.mode)


@dataclass(eq=False)
class CrossGramian:
    G: np.ndarray
    sigma_min: float

    @property
    def mu(self):
        return 1.0 / self.sigma_min if self.sigma_min >= SIGMA_MIN_TOL else np.inf


def build_affine_space(solutions, space, n, offset=None):
    """Mean offset plus the leading ``n`` POD modes of the centered snapshots."""
    if n < 0 or n > space.m:
        raise ValueError(f"reduced dimension must satisfy 0 <= n <= m={space.m}, got {n}")
    U = np.atleast_2d(np.asarray(solutions, dtype=float))
    ubar = U.mean(axis=0) if offset is None else np.asarray(offset, dtype=float)
    Q = space.gram
    lam, modes = weighted_spectrum(U - ubar, Q)
    # cutoff relative to the snapshot energy so that roundoff modes are dropped
    scale = float(np.einsum("ij,ij->", U, (Q @ U.T).T))
    rank = int(np.count_nonzero(lam > SIGMA_MIN_TOL * scale)) if lam.size else 0
    return AffineSpace(ubar, modes[: min(n, rank)], space.mode)


def cross_gramian(aff, space):
    Q = space.gram
    G = aff.xi @ (Q @ space.phi.T)
    s = la.svdvals(G) if aff.n else np.array([np.inf])
    return CrossGramian(G, float(s.min()) if s.size else np.inf)


def compute_mu(aff, space):
    """``mu = 1 / sigma_min``; ``inf`` when the reduced space meets ``W``-perp."""
    if aff.n == 0:
        return 1.0
    return cross_gramian(aff, space).mu


def pbdw_estimate(aff, space, w):
    """Affine recovery from sensor coordinates ``w`` (one state per row)."""
    w = np.asarray(w, dtype=float)
    Q = space.gram
    w_bar = space.phi @ (Q @ aff.ubar)
    shifted = np.atleast_2d(w - w_bar)
    if aff.n:
        cg = cross_gramian(aff, space)
        if not np.isfinite(cg.mu):
            raise UnrecoverableSpaceError(
                f"cross-Gramian is singular (sigma_min={cg.sigma_min:.2e}); the reduced "
                f"space of dimension {aff.n} contains functions invisible to the sensors"
            )
        eta = la.lstsq(cg.G.T, shifted.T)[0].T
        v = aff.ubar + eta @ aff.xi
    else:
        v = np.broadcast_to(aff.ubar, (shifted.shape[0], aff.ubar.size))
    wv = (Q @ v.T).T @ space.phi.T
    u = v + (np.atleast_2d(w) - wv) @ space.phi
    return u if w.ndim > 1 else u[0]


def distance_to_space(aff, u, mesh):
    """``||u - P u||`` with ``P`` the projection onto the affine space."""
    Q = fem.gram_matrix(mesh, aff.mode)
    d = np.atleast_2d(u) - aff.ubar
    if aff.n:
        d = d - ((Q @ d.T).T @ aff.xi.T) @ aff.xi
    return fem.norm(mesh, d, aff.mode)


def check_error_bound(aff, space, solutions, w=None):
    """Worst ratio ``||u* - u|| / (mu dist(u, U_n) + 1e-8 ||u||)``.

    Returns ``(worst_ratio, mu, errors)``; a ratio at most 1 means the bound holds.
    """
    U = np.atleast_2d(solutions)
    w = space.coords(U) if w is None else w
    mu = compute_mu(aff, space)
    err = fem.norm(space.mesh, pbdw_estimate(aff, space, w) - U, aff.mode)
    bound = mu * distance_to_space(aff, U, space.mesh) + 1e-8 * fem.norm(space.mesh, U, aff.mode)
    ratio = np.where(bound > 0, err / np.where(bound > 0, bound, 1.0), 0.0)
    return float(ratio.max()), mu, err


def scan_dimensions(train_solutions, space, eval_solutions, eval_w=None, n_values=None):
    """Ghost errors for ``n`` in ``n_values`` (default ``0..m``).

    Returns rows ``{"n", "mu", "max_h1", "mean_h1"}``; rows with infinite ``mu``
    have NaN errors.
    """
    U = np.atleast_2d(eval_solutions)
    w = space.coords(U) if eval_w is None else eval_w
    full = build_affine_space(train_solutions, space, space.m)
    n_values = range(full.n + 1) if n_values is None else n_values
    rows = []
    for n in n_values:
        aff = full.truncate(n)
        mu = compute_mu(aff, space)
        if np.isfinite(mu):
            e = fem.norm(space.mesh, pbdw_estimate(aff, space, w) - U, fem.H1)
            mx, mean = float(e.max()), float(e.mean())
        else:
            mx = mean = float("nan")
        rows.append({"n": n, "mu": float(mu), "max_h1": mx, "mean_h1": mean})
    return rows


def best_dimension(rows):
    """Row minimizing the max ghost H1 error (ignores flagged rows)."""
    ok = [r for r in rows if np.isfinite(r["max_h1"])]
    return min(ok, key=lambda r: r["max_h1"])


def write_comparison(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(COMPARE_COLUMNS)
        for r in rows:
            wr.writerow([r[k] if isinstance(r[k], str) else repr(r[k]) for k in COMPARE_COLUMNS])
