"""Block residual network mapping sensor coordinates to complement coefficients.

Block 1 is ``W3 tanh(W2 tanh(W1 x + b1) + b2) + W0 x``; every further block
adds an identity skip, ``W3 tanh(W2 tanh(W1 x + b1) + b2) + x``, and the
network is the composition of its blocks.  Inputs are batched as rows.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

@dataclass
class Block:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray

    def arrays(self):
        return [self.W1, self.b1, self.W2, self.b2, self.W3]

    def copy(self):
        return Block(*(a.copy() for a in self.arrays()))


@dataclass
class ResNetParams:
    theta0: np.ndarray
    blocks: list = field(default_factory=list)

    @property
    def m(self):
        return self.theta0.shape[1]

    @property
    def k(self):
        return self.theta0.shape[0]

    @property
    def width(self):
        return self.blocks[0].W2.shape[0] if self.blocks else 0

    @property
    def n_blocks(self):
        return len(self.blocks)

    def groups(self):
        """Parameter arrays per group: ``[[W0], block 1 arrays, ...]``."""
        return [[self.theta0]] + [b.arrays() for b in self.blocks]

    def arrays(self):
        return [a for g in self.groups() for a in g]

    def copy(self):
        return ResNetParams(self.theta0.copy(), [b.copy() for b in self.blocks])

    def prefix(self, n_blocks):
        """View of the first ``n_blocks`` blocks (arrays shared, not copied)."""
        return ResNetParams(self.theta0, self.blocks[:n_blocks])

    def zeros_like(self):
        return ResNetParams(
            np.zeros_like(self.theta0),
            [Block(*(np.zeros_like(a) for a in b.arrays())) for b in self.blocks],
        )


@dataclass(frozen=True)
class TrainableMask:
    """Which parameter groups receive updates: ``W0`` plus one flag per block."""

    theta0: bool
    blocks: tuple

    @classmethod
    def full(cls, n_blocks):
        return cls(True, (True,) * n_blocks)

    @classmethod
    def only_block(cls, index, n_blocks):
        """Only block ``index`` (1-based); block 1 also carries ``W0``."""
        return cls(index == 1, tuple(i == index for i in range(1, n_blocks + 1)))

    def groups(self):
        return (self.theta0,) + tuple(self.blocks)

    def __post_init__(self):
        if not any(self.groups()):
            raise ValueError("mask disables every parameter group")


def init_gaussian(m, k, width, n_blocks=1, std=0.1, rng=None):
    """All weights and biases i.i.d. ``N(0, std^2)``."""
    if not std > 0:
        raise ValueError("std must be positive")
    rng = np.random.default_rng() if rng is None else rng
    theta0 = rng.normal(0.0, std, (k, m))
    p = ResNetParams(theta0, [])
    for i in range(n_blocks):
        p.blocks.append(_gaussian_block(m if i == 0 else k, k, width, std, rng))
    return p


def _gaussian_block(d_in, k, width, std, rng):
    return Block(
        rng.normal(0.0, std, (width, d_in)),
        rng.normal(0.0, std, width),
        rng.normal(0.0, std, (width, width)),
        rng.normal(0.0, std, width),
        rng.normal(0.0, std, (k, width)),
    )


def append_block(p, init="gaussian", std=0.1, rng=None, width=None):
    """Return a copy of ``p`` with one more block.

    ``init="zero_last"`` zeroes the new output map ``W3`` so the network output
    is unchanged.
    """
    rng = np.random.default_rng() if rng is None else rng
    width = width or p.width
    blk = _gaussian_block(p.k, p.k, width, std, rng)
    if init == "zero_last":
        blk.W3[:] = 0.0
    elif init != "gaussian":
        raise ValueError(f"unknown block init {init!r}")
    q = p.copy()
    q.blocks.append(blk)
    return q


def count_params(p):
    return sum(a.size for a in p.arrays())


def block_branch(blk, x):
    """Non-skip part of a block, ``W3 tanh(W2 tanh(W1 x + b1) + b2)``."""
    h1 = np.tanh(x @ blk.W1.T + blk.b1)
    h2 = np.tanh(h1 @ blk.W2.T + blk.b2)
    return h2 @ blk.W3.T


def forward(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.m:
        raise ValueError(f"input has dimension {x.shape[-1]}, network expects {p.m}")
    if not p.blocks:
        return x @ p.theta0.T
    out = block_branch(p.blocks[0], x) + x @ p.theta0.T
    for blk in p.blocks[1:]:
        out = block_branch(blk, out) + out
    return out


def _branch_backward(blk, x, h1, h2, g_out, need_input_grad):
    gW3 = g_out.T @ h2
    g_a2 = (g_out @ blk.W3) * (1.0 - h2 * h2)
    gW2 = g_a2.T @ h1
    g_a1 = (g_a2 @ blk.W2) * (1.0 - h1 * h1)
    gW1 = g_a1.T @ x
    g_x = g_a1 @ blk.W1 if need_input_grad else None
    return Block(gW1, g_a1.sum(axis=0), gW2, g_a2.sum(axis=0), gW3), g_x


def loss_and_gradient(p, w, c, mask=None):
    """Batch mean squared error and its exact gradient.

    Groups switched off in ``mask`` get all-zero gradients; backpropagation stops
    below the lowest trainable block.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if w.shape[1] != p.m or c.shape[1] != p.k or w.shape[0] != c.shape[0]:
        raise ValueError("batch shapes do not match the network")
    mask = mask or TrainableMask.full(p.n_blocks)
    if len(mask.blocks) != p.n_blocks:
        raise ValueError("mask does not match the number of blocks")
    N = w.shape[0]

    caches = []
    x = w
    for i, blk in enumerate(p.blocks):
        h1 = np.tanh(x @ blk.W1.T + blk.b1)
        h2 = np.tanh(h1 @ blk.W2.T + blk.b2)
        skip = x @ p.theta0.T if i == 0 else x
        caches.append((x, h1, h2))
        x = h2 @ blk.W3.T + skip
    if not p.blocks:
        x = w @ p.theta0.T
    resid = x - c
    with np.errstate(over="ignore", invalid="ignore"):
        # a non-finite loss is reported by the caller
        loss = float(np.sum(resid * resid) / N)

    grads = p.zeros_like()
    flags = mask.groups()
    lowest = next(i for i, f in enumerate(flags) if f)  # 0 = W0, i = block i
    g = (2.0 / N) * resid
    stop = max(lowest, 1)
    for i in range(p.n_blocks, stop - 1, -1):
        xin, h1, h2 = caches[i - 1]
        need = i > stop
        gb, g_x = _branch_backward(p.blocks[i - 1], xin, h1, h2, g, need)
        if flags[i]:
            grads.blocks[i - 1] = gb
        if i == 1 and flags[0]:
            grads.theta0 = g.T @ xin
        if need:
            g = g + g_x
    if not p.blocks and flags[0]:
        grads.theta0 = g.T @ w
    return loss, grads


def branch_loss_and_gradient(blk, x, target):
    """Loss and gradient of a single block branch fitted to ``target``."""
    h1 = np.tanh(x @ blk.W1.T + blk.b1)
    h2 = np.tanh(h1 @ blk.W2.T + blk.b2)
    resid = h2 @ blk.W3.T - target
    N = x.shape[0]
    gb, _ = _branch_backward(blk, x, h1, h2, (2.0 / N) * resid, False)
    return float(np.sum(resid * resid) / N), gb


def gradient(p, mask, w, c):
    return loss_and_gradient(p, w, c, mask)[1]


# --- model file ----------------------------------------------------------------
#
# little endian; magic "PDENN", version u32, m u32, k u32, width u32, B u32,
# then float64 arrays W0 (k x m) and per block W1, b1, W2, b2, W3.

MODEL_MAGIC = b"PDENN"
MODEL_VERSION = 1
_HEADER = struct.Struct("<5sIIIII")


def _shapes(m, k, width, n_blocks):
    shapes = [(k, m)]
    for i in range(n_blocks):
        d_in = m if i == 0 else k
        shapes += [(width, d_in), (width,), (width, width), (width,), (k, width)]
    return shapes


def serialize(p):
    parts = [_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, p.m, p.k, p.width, p.n_blocks)]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in p.arrays()]
    return b"".join(parts)


def deserialize(data):
    if len(data) < _HEADER.size:
        raise FormatError("model file truncated before the header ends")
    magic, version, m, k, width, n_blocks = _HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    shapes = _shapes(m, k, width, n_blocks)
    expected = _HEADER.size + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) != expected:
        raise FormatError(f"model file has {len(data)} bytes, header implies {expected}")
    off = _HEADER.size
    arrays = []
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(s).copy())
        off += 8 * n
    blocks = [Block(*arrays[1 + 5 * i: 6 + 5 * i]) for i in range(n_blocks)]
    return ResNetParams(arrays[0], blocks)


def save(path, p):
    with open(path, "wb") as fh:
        fh.write(serialize(p))


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
