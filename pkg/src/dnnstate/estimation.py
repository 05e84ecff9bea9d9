"""Data-to-state estimator ``u = Phi^T w + Psi^T NN(w)`` and its error metrics."""

import csv
from dataclasses import dataclass

import numpy as np

from . import fem, resnet
from .errors import UndefinedMetricError
from .sensing import measure_coords

TABLE_COLUMNS = ("B", "W", "trainables", "scheme", "ehat", "rel_l2", "rel_h1")


@dataclass(eq=False)
class Estimator:
    space: object
    basis: object
    net: resnet.ResNetParams

    def __post_init__(self):
        if self.net.m != self.space.m or self.net.k != self.basis.k:
            raise ValueError(
                f"network maps R^{self.net.m} -> R^{self.net.k}, but the measurement "
                f"space has m={self.space.m} and the complement basis k={self.basis.k}"
            )

    @property
    def mode(self):
        return self.space.mode

    @property
    def mesh(self):
        return self.space.mesh


def predict_coefficients(est, w):
    return resnet.forward(est.net, w)


def predict_from_coords(est, w):
    """State(s) from sensor coordinates ``w``."""
    w = np.asarray(w, dtype=float)
    return w @ est.space.phi + predict_coefficients(est, w) @ est.basis.psi


def predict_state(est, o):
    """State(s) from raw sensor observations ``o``."""
    o = np.asarray(o, dtype=float)
    if not np.all(np.isfinite(o)):
        raise ValueError("observations must be finite")
    return predict_from_coords(est, measure_coords(est.space, o))


def metric_ehat(w, c, c_pred):
    """``sqrt(sum ||c - c_pred||^2 / sum (||w||^2 + ||c||^2))`` over samples (rows)."""
    w, c, c_pred = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (w, c, c_pred))
    if w.shape[0] == 0:
        raise UndefinedMetricError("empty evaluation set")
    den = np.sum(w * w) + np.sum(c * c)
    if den == 0:
        raise UndefinedMetricError("relative error undefined: all data and labels vanish")
    return float(np.sqrt(np.sum((c - c_pred) ** 2) / den))


def metric_relative_u(mesh, u, u_pred, mode):
    """``sqrt(sum ||u - u_pred||^2 / sum ||u||^2)`` in the ``mode`` norm."""
    u = np.atleast_2d(u)
    err = fem.norm(mesh, u - np.atleast_2d(u_pred), mode)
    ref = fem.norm(mesh, u, mode)
    den = np.sum(ref**2)
    if den == 0:
        raise UndefinedMetricError("relative error undefined: reference states vanish")
    return float(np.sqrt(np.sum(err**2) / den))


def metric_max_h1(mesh, u, u_pred):
    """Largest absolute H1-seminorm error over samples."""
    return float(np.max(fem.norm(mesh, np.atleast_2d(u) - np.atleast_2d(u_pred), fem.H1)))


def evaluate(est, w, c, solutions):
    """All metrics on an evaluation split given coordinates, labels and truth states."""
    c_pred = predict_coefficients(est, w)
    u_pred = np.asarray(w) @ est.space.phi + c_pred @ est.basis.psi
    return {
        "ehat": metric_ehat(w, c, c_pred),
        "rel_l2": metric_relative_u(est.mesh, solutions, u_pred, fem.L2),
        "rel_h1": metric_relative_u(est.mesh, solutions, u_pred, fem.H1),
        "max_h1": metric_max_h1(est.mesh, solutions, u_pred),
    }


def write_error_table(path, rows):
    """Rows are dicts with at least the keys of ``TABLE_COLUMNS``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TABLE_COLUMNS)
        for r in rows:
            wr.writerow([_fmt(r[k]) for k in TABLE_COLUMNS])


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
