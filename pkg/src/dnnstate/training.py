"""Optimizers and training schedules for the block ResNet.

Two schedules are provided.  Global training (``train_global``) updates every
parameter at every step.  Expansion training (``train_expansion``) trains a
one-block network first, then repeatedly appends a block and trains only
that block for an equal share of the step budget, with all earlier
parameters frozen.  Because earlier blocks are frozen, a stage is run on the
residual dataset ``(prefix(w), c - prefix(w))``, which gives the same loss and
the same gradients as the full network at a fraction of the cost.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import resnet
from .errors import TrainingDivergedError

PROXIMAL_ADAGRAD = "proximal_adagrad"
ADAM = "adam"
GLOBAL = "global"
EXPANSION = "expansion"
EXPANSION_PLUS_GLOBAL = "expansion_plus_global"
SCHEDULES = (GLOBAL, EXPANSION, EXPANSION_PLUS_GLOBAL)


@dataclass
class TrainConfig:
    lr: float = 0.02
    batch: int = 100
    l1: float = 1e-5
    steps: int = 10_000
    optimizer: str = PROXIMAL_ADAGRAD
    schedule: str = EXPANSION
    blocks: int = 1
    width: int = 20
    seed: int = 0
    extra_steps: int = 0
    init_std: float = 0.1
    new_block_init: str = "gaussian"
    record_every: int = 100
    stagnation_tol: float = None
    stagnation_window: int = 1000
    adagrad_init: float = 0.1
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    timing: bool = False

    def __post_init__(self):
        if self.steps < 0 or self.extra_steps < 0:
            raise ValueError("step counts must be non-negative")
        if self.batch < 1:
            raise ValueError("batch size must be at least 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.blocks < 1:
            raise ValueError("need at least one block")
        if self.optimizer not in (PROXIMAL_ADAGRAD, ADAM):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclass
class LossHistory:
    """Training loss averaged over each recording interval.

    ``block`` is the block being trained (0 while all blocks are trained).
    """

    step: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    block: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)

    def __len__(self):
        return len(self.step)

    def append(self, step, loss, block, wall_ms=None):
        self.step.append(int(step))
        self.loss.append(float(loss))
        self.block.append(int(block))
        self.wall_ms.append(wall_ms)

    def extend(self, other):
        for row in zip(other.step, other.loss, other.block, other.wall_ms):
            self.append(*row)

    @property
    def boundaries(self):
        """Last recorded step of each stage that is followed by a different block."""
        return [self.step[i - 1] for i in range(1, len(self.step)) if self.block[i] != self.block[i - 1]]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["step", "loss", "block_index", "wall_ms"])
            for s, l, b, t in zip(self.step, self.loss, self.block, self.wall_ms):
                wr.writerow([s, repr(l), b, "" if t is None else f"{t:.3f}"])

    @classmethod
    def from_csv(cls, path):
        h = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                t = row["wall_ms"]
                h.append(int(row["step"]), float(row["loss"]), int(row["block_index"]),
                         float(t) if t else None)
        return h


# --- optimizers ----------------------------------------------------------------


def soft_threshold(x, tau):
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def proximal_adagrad_step(acc, p, g, lr, l1):
    """In-place proximal Adagrad update of array ``p`` with accumulator ``acc``.

    ``acc += g^2``; ``eta = lr / sqrt(acc)``; ``p <- shrink(p - eta g, eta l1)``.
    """
    acc += g * g
    eta = lr / np.sqrt(acc)
    p -= eta * g
    if l1:
        p[...] = soft_threshold(p, eta * l1)


def adam_step(state, p, g, lr, l1=0.0, betas=(0.9, 0.999), eps=1e-8):
    """In-place bias-corrected Adam; ``l1 sign(p)`` is added to the gradient.

    ``state`` is a dict with moment arrays ``"m"``, ``"v"`` and the step count ``"t"``.
    """
    if l1:
        g = g + l1 * np.sign(p)
    b1, b2 = betas
    state["t"] += 1
    t = state["t"]
    state["m"] *= b1
    state["m"] += (1 - b1) * g
    state["v"] *= b2
    state["v"] += (1 - b2) * g * g
    m_hat = state["m"] / (1 - b1**t)
    v_hat = state["v"] / (1 - b2**t)
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Optimizer:
    """Per-array optimizer state for a fixed list of parameter arrays."""

    def __init__(self, arrays, cfg):
        self.cfg = cfg
        if cfg.optimizer == PROXIMAL_ADAGRAD:
            self.state = [np.full_like(a, cfg.adagrad_init) for a in arrays]
        else:
            self.state = [{"m": np.zeros_like(a), "v": np.zeros_like(a), "t": 0} for a in arrays]

    def step(self, arrays, grads):
        cfg = self.cfg
        for st, p, g in zip(self.state, arrays, grads):
            if cfg.optimizer == PROXIMAL_ADAGRAD:
                proximal_adagrad_step(st, p, g, cfg.lr, cfg.l1)
            else:
                adam_step(st, p, g, cfg.lr, cfg.l1, cfg.betas, cfg.eps)


# --- losses --------------------------------------------------------------------


def batch_loss(p, w, c):
    """Mean squared Euclidean error, without the l1 term."""
    resid = resnet.forward(p, w) - np.asarray(c)
    resid = np.atleast_2d(resid)
    return float(np.sum(resid * resid) / resid.shape[0])


def residual_dataset(p_frozen, w, c):
    """Inputs ``prefix(w)`` and targets ``c - prefix(w)`` for the next block."""
    x = resnet.forward(p_frozen, w)
    return x, np.asarray(c) - x


# --- training loops ------------------------------------------------------------


def _stream(seed, stage):
    return np.random.default_rng([int(seed), int(stage)])


class _Recorder:
    def __init__(self, cfg, history, start_step, t0):
        self.cfg = cfg
        self.history = history
        self.step = start_step
        self.t0 = t0
        self._sum = 0.0
        self._count = 0

    def add(self, loss, block):
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite training loss {loss!r} at step {self.step} (block {block}); "
                "try a smaller learning rate",
                step=self.step,
                loss=loss,
            )
        self.step += 1
        self._sum += loss
        self._count += 1
        if self.step % self.cfg.record_every == 0:
            self.flush(block)

    def flush(self, block):
        if self._count:
            t = (time.perf_counter() - self.t0) * 1e3 if self.cfg.timing else None
            self.history.append(self.step, self._sum / self._count, block, t)
            self._sum, self._count = 0.0, 0

    def stagnated(self):
        tol = self.cfg.stagnation_tol
        n = max(self.cfg.stagnation_window // self.cfg.record_every, 1)
        loss = self.history.loss
        if tol is None or len(loss) <= n:
            return False
        old, new = loss[-n - 1], loss[-1]
        return (old - new) < tol * abs(old)


def _run_full(p, w, c, cfg, steps, stage, mask, recorder, block_label):
    """``steps`` optimizer steps on the full network restricted to ``mask``."""
    rng = _stream(cfg.seed, stage)
    groups = [g for g, on in zip(p.groups(), mask.groups()) if on]
    arrays = [a for g in groups for a in g]
    opt = Optimizer(arrays, cfg)
    N = w.shape[0]
    for _ in range(steps):
        idx = rng.integers(0, N, cfg.batch)
        loss, grads = resnet.loss_and_gradient(p, w[idx], c[idx], mask)
        recorder.add(loss, block_label)
        gsel = [a for g, on in zip(grads.groups(), mask.groups()) if on for a in g]
        opt.step(arrays, gsel)
        if recorder.stagnated():
            break
    recorder.flush(block_label)
    return p


def _run_block(blk, x, target, cfg, steps, stage, recorder, block_label):
    """Train one block branch on a residual dataset."""
    rng = _stream(cfg.seed, stage)
    arrays = blk.arrays()
    opt = Optimizer(arrays, cfg)
    N = x.shape[0]
    for _ in range(steps):
        idx = rng.integers(0, N, cfg.batch)
        loss, gb = resnet.branch_loss_and_gradient(blk, x[idx], target[idx])
        recorder.add(loss, block_label)
        opt.step(arrays, gb.arrays())
        if recorder.stagnated():
            break
    recorder.flush(block_label)
    return blk


def init_network(m, k, cfg, n_blocks=None):
    return resnet.init_gaussian(
        m, k, cfg.width, n_blocks or cfg.blocks, cfg.init_std, _stream(cfg.seed, 10_000)
    )


def train_global(p, w, c, cfg, history=None):
    """``cfg.steps`` steps on all parameters of ``p`` (a copy is trained)."""
    p = p.copy()
    history = LossHistory() if history is None else history
    start = history.step[-1] if history.step else 0
    rec = _Recorder(cfg, history, start, time.perf_counter())
    _run_full(p, w, c, cfg, cfg.steps, 1, resnet.TrainableMask.full(p.n_blocks), rec, 0)
    return p, history


def stage_steps(total, n_blocks):
    """Equal share ``total // B`` per block; the remainder goes to the last block."""
    base = total // n_blocks
    return [base] * (n_blocks - 1) + [total - base * (n_blocks - 1)]


def train_expansion(w, c, cfg, p_init=None):
    """Blockwise expansion up to ``cfg.blocks`` blocks.

    Stage 1 trains ``W0`` and block 1; stage ``i`` appends block ``i`` and trains
    only it.  Optimizer state is fresh per stage and blocks are never revisited.
    """
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    p = init_network(w.shape[1], c.shape[1], cfg, 1) if p_init is None else p_init.copy()
    history = LossHistory()
    rec = _Recorder(cfg, history, 0, time.perf_counter())
    budget = stage_steps(cfg.steps, cfg.blocks)
    _run_full(p, w, c, cfg, budget[0], 1, resnet.TrainableMask.full(1), rec, 1)
    for stage in range(2, cfg.blocks + 1):
        x, target = residual_dataset(p, w, c)
        p = resnet.append_block(
            p, cfg.new_block_init, cfg.init_std, _stream(cfg.seed, 10_000 + stage)
        )
        _run_block(p.blocks[-1], x, target, cfg, budget[stage - 1], stage, rec, stage)
    return p, history


def train_schedule_plus_global(p, w, c, cfg, extra_steps, history=None):
    """Extra full-network steps after an expansion phase."""
    history = LossHistory() if history is None else history
    if extra_steps == 0:
        return p, history
    p = p.copy()
    start = history.step[-1] if history.step else 0
    rec = _Recorder(cfg, history, start, time.perf_counter())
    _run_full(p, w, c, cfg, extra_steps, p.n_blocks + 1,
              resnet.TrainableMask.full(p.n_blocks), rec, 0)
    return p, history


def train(w, c, cfg):
    """Train a network for ``(w, c)`` pairs according to ``cfg.schedule``."""
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    if w.shape[0] == 0:
        raise ValueError("empty training set")
    if cfg.schedule == GLOBAL:
        return train_global(init_network(w.shape[1], c.shape[1], cfg), w, c, cfg)
    p, history = train_expansion(w, c, cfg)
    if cfg.schedule == EXPANSION_PLUS_GLOBAL:
        p, history = train_schedule_plus_global(p, w, c, cfg, cfg.extra_steps, history)
    return p, history
