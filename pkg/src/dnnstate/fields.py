"""Parametric diffusion coefficients.

Two families are provided:

* piecewise constant (``pwc``): ``a = 1 + y_j`` on the cells of a 4x4
  checkerboard, ``y_j ~ U[-1/2, 1/2]``;
* log-normal: ``a = a0 + a1 * exp(z)`` with ``z`` a zero-mean stationary
  Gaussian field with Matern covariance, sampled on the mesh nodes by
  circulant embedding.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma, kv

from .errors import NonPositiveEmbeddingError

N_CELLS_PER_SIDE = 4
N_PARAMS_S1 = N_CELLS_PER_SIDE**2


def sample_param_s1(rng):
    """Sixteen i.i.d. draws from ``U[-1/2, 1/2]``."""
    return rng.uniform(-0.5, 0.5, size=N_PARAMS_S1)


def checkerboard_cell(x):
    """Row-major checkerboard index ``4 * floor(4 x2) + floor(4 x1)``, clamped."""
    x = np.asarray(x, dtype=float)
    ij = np.clip(np.floor(N_CELLS_PER_SIDE * x).astype(int), 0, N_CELLS_PER_SIDE - 1)
    return ij[..., 1] * N_CELLS_PER_SIDE + ij[..., 0]


def eval_s1(y, x):
    """Evaluate the piecewise constant coefficient at point(s) ``x``."""
    return 1.0 + np.asarray(y)[checkerboard_cell(x)]


def s1_element_values(y, mesh):
    """Coefficient at every element barycenter."""
    return eval_s1(y, mesh.barycenters)


@dataclass(frozen=True)
class MaternSpec:
    """Matern covariance ``sigma2 2^(1-nu)/Gamma(nu) (2 sqrt(nu) r)^nu K_nu(2 sqrt(nu) r)``.

    ``r`` is the anisotropic distance with correlation lengths ``lam1``, ``lam2``.
    The coefficient built from it is ``a0 + a1 * exp(z)``.
    """

    sigma2: float = 1.0
    nu: float = 1.0
    lam1: float = 0.2
    lam2: float = 0.2
    a0: float = 0.0
    a1: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not (self.lam1 > 0 and self.lam2 > 0):
            raise ValueError("correlation lengths must be positive")
        if not self.a1 > 0:
            raise ValueError("a1 must be positive")
        if not self.a0 >= 0:
            raise ValueError("a0 must be non-negative")


def matern_from_distance(spec, r):
    """Matern covariance as a function of the scaled distance ``r``."""
    r = np.asarray(r, dtype=float)
    s = 2.0 * np.sqrt(spec.nu) * r
    out = np.full(s.shape, spec.sigma2)
    pos = s > 0
    sp_ = s[pos]
    out[pos] = spec.sigma2 * 2.0 ** (1.0 - spec.nu) / gamma(spec.nu) * sp_**spec.nu * kv(spec.nu, sp_)
    return out if out.ndim else float(out)


def matern_cov(spec, x, xp):
    """Covariance between points ``x`` and ``xp`` (broadcasting over leading axes)."""
    d = np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)
    r = np.sqrt((d[..., 0] / spec.lam1) ** 2 + (d[..., 1] / spec.lam2) ** 2)
    return matern_from_distance(spec, r)


class CirculantEmbedding:
    """Exact sampler for a stationary Matern field on a regular ``N x N`` node grid.

    The covariance of the grid is embedded in a block circulant matrix on a
    periodic grid of ``P = pad * (N - 1)`` points per side; its eigenvalues are
    the 2D FFT of the first row.  Negative eigenvalues below
    ``-tol * max`` are fatal; smaller ones are clipped to zero.
    """

    def __init__(self, spec, n_points, spacing, pad=2, max_doublings=3, tol=1e-8):
        self.spec = spec
        self.n_points = n_points
        self.spacing = spacing
        for attempt in range(max_doublings + 1):
            P = pad * (n_points - 1)
            lam = self._eigenvalues(P)
            lo = lam.min()
            if lo >= -tol * lam.max():
                break
            if attempt == max_doublings:
                raise NonPositiveEmbeddingError(
                    f"circulant embedding of size {P} has eigenvalue {lo:.3e} "
                    f"(max {lam.max():.3e}); enlarge the periodic grid by at least "
                    f"a factor {2 * pad}",
                    suggested_factor=2 * pad,
                )
            pad *= 2
        self.pad = pad
        self.size = P
        self.min_eigenvalue = float(lo)
        self._sqrt_lam = np.sqrt(np.clip(lam, 0.0, None) / (P * P))

    def _eigenvalues(self, P):
        k = np.arange(P)
        lag = np.minimum(k, P - k) * self.spacing
        d1, d2 = np.meshgrid(lag, lag, indexing="ij")
        r = np.sqrt((d1 / self.spec.lam1) ** 2 + (d2 / self.spec.lam2) ** 2)
        row = matern_from_distance(self.spec, r)
        return np.fft.fft2(row).real

    def sample(self, rng):
        """One realization as an ``(N, N)`` array indexed ``[j, i]`` (x2, x1)."""
        P = self.size
        eps = rng.standard_normal((P, P)) + 1j * rng.standard_normal((P, P))
        field = np.fft.fft2(self._sqrt_lam * eps)
        N = self.n_points
        # axis 0 of the embedding is x1; transpose to the mesh's row-major [x2, x1]
        return field.real[:N, :N].T.copy()


@lru_cache(maxsize=8)
def _embedding(spec, n):
    return CirculantEmbedding(spec, n + 1, 1.0 / n)


def sample_grf_circulant(spec, mesh, rng):
    """One realization of the Matern field at the mesh nodes (length ``(n+1)**2``)."""
    return _embedding(spec, mesh.n).sample(rng).ravel()


def s2_element_values(spec, z, mesh):
    """``a0 + a1 exp(z)`` with ``z`` averaged over each element's vertices."""
    z_bar = np.asarray(z)[mesh.elements].mean(axis=1)
    return spec.a0 + spec.a1 * np.exp(z_bar)


def eval_s2(spec, z, mesh, element):
    """Coefficient on a single element."""
    return float(s2_element_values(spec, z, mesh)[element])
