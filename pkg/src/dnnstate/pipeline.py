"""End-to-end experiment steps shared by the command line, demos and tests.

Every step is a deterministic function of a resolved config (see
``config.parse``) and the artifacts produced by earlier steps.
"""

from dataclasses import dataclass

import numpy as np

from . import estimation, fem, fields, reduction, resnet, sensing, training
from .errors import ArtifactMismatchError

SPLIT_STREAM = 1
SENSOR_STREAM = 2


def matern_spec(cfg):
    d = cfg["data"]
    return fields.MaternSpec(d["sigma2"], d["nu"], d["lam1"], d["lam2"], d["a0"], d["a1"])


def make_sensors(cfg, count=None):
    """Sensor array from the config; ``count`` takes a prefix of a random layout."""
    d = cfg["data"]
    if d["sensors"] == "random":
        rng = np.random.default_rng([d["sensor_seed"], SENSOR_STREAM])
        total = max(d["n_sensors"], count or 0)
        return sensing.place_random(total, rng).subset(count or d["n_sensors"])
    if count is not None and count != d["n_sensors"]:
        raise ValueError(f"layout {d['sensors']} has a fixed number of sensors")
    return sensing.place_uniform(d["n_sensors"])


def measurement_space(cfg, mesh, count=None):
    return sensing.build_measurement_space(make_sensors(cfg, count), mesh, cfg["data"]["mode"])


def generate(cfg, mesh=None):
    """Solve all snapshots and measure them with the configured sensors."""
    d = cfg["data"]
    mesh = mesh or fem.build_mesh(d["mesh_n"])
    space = measurement_space(cfg, mesh)
    return reduction.generate_snapshots(
        d["scenario"], d["n_snapshots"], mesh, space, d["master_seed"], matern_spec(cfg)
    )


def check_snapshots(cfg, snaps, mesh):
    d = cfg["data"]
    problems = []
    if snaps.scenario != d["scenario"]:
        problems.append(f"scenario {snaps.scenario} != {d['scenario']}")
    if snaps.n_dofs != mesh.n_dofs:
        problems.append(f"{snaps.n_dofs} DOFs != {mesh.n_dofs} for mesh_n={d['mesh_n']}")
    if snaps.m != d["n_sensors"]:
        problems.append(f"{snaps.m} sensors != {d['n_sensors']}")
    if len(snaps) != d["n_snapshots"]:
        problems.append(f"{len(snaps)} snapshots != {d['n_snapshots']}")
    if problems:
        raise ArtifactMismatchError("snapshot cache does not match config: " + "; ".join(problems))


def split(cfg, n_samples):
    rng = np.random.default_rng([cfg["data"]["master_seed"], SPLIT_STREAM])
    return reduction.split_train_ghost(n_samples, cfg["data"]["n_ghost"], rng)


@dataclass(eq=False)
class Prepared:
    """Everything needed to train and evaluate on one snapshot set."""

    mesh: object
    space: object
    basis: object
    solutions: np.ndarray
    w: np.ndarray
    c: np.ndarray
    train_idx: np.ndarray
    ghost_idx: np.ndarray


def prepare(cfg, snaps, mesh=None, space=None):
    """Split, run the complement POD on the training part and extract labels."""
    d = cfg["data"]
    mesh = mesh or fem.build_mesh(d["mesh_n"])
    check_snapshots(cfg, snaps, mesh)
    space = space or measurement_space(cfg, mesh)
    train_idx, ghost_idx = split(cfg, len(snaps))
    basis = reduction.pod_complement(snaps.z[train_idx], mesh, d["mode"], d["energy"])
    c = reduction.extract_labels(snaps.solutions, basis, mesh)
    return Prepared(mesh, space, basis, snaps.solutions, snaps.w, c, train_idx, ghost_idx)


def train_config(cfg, schedule):
    n, t = cfg["net"], cfg["train"]
    return training.TrainConfig(
        lr=t["lr"], batch=t["batch"], l1=t["l1"], steps=t["steps"], optimizer=t["optimizer"],
        schedule=schedule, blocks=n["blocks"], width=n["width"], seed=t["seed"],
        extra_steps=t["extra_steps"], init_std=n["init_std"], new_block_init=n["new_block_init"],
        record_every=t["record_every"],
    )


def train(cfg, prep, schedule):
    tcfg = train_config(cfg, schedule)
    i = prep.train_idx
    return training.train(prep.w[i], prep.c[i], tcfg)


def check_model(prep, net):
    if net.m != prep.space.m or net.k != prep.basis.k:
        raise ArtifactMismatchError(
            f"model maps R^{net.m} -> R^{net.k} but data has m={prep.space.m}, k={prep.basis.k}"
        )


def evaluate(prep, net, idx=None):
    check_model(prep, net)
    est = estimation.Estimator(prep.space, prep.basis, net)
    i = prep.ghost_idx if idx is None else idx
    return estimation.evaluate(est, prep.w[i], prep.c[i], prep.solutions[i])


def table_row(cfg, net, schedule, metrics):
    trainables = resnet.count_params(net)
    return dict(B=net.n_blocks, W=net.width, trainables=trainables, scheme=schedule, **metrics)
