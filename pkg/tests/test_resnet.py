import numpy as np
import pytest

from dnnstate import resnet
from dnnstate.errors import FormatError


def direct_forward(p, x):
    """Per-sample loop evaluator, written independently of the batched code."""
    out = []
    for xi in np.atleast_2d(x):
        v = xi.copy()
        for i, b in enumerate(p.blocks):
            h = np.tanh(b.W2 @ np.tanh(b.W1 @ v + b.b1) + b.b2)
            v = b.W3 @ h + (p.theta0 @ v if i == 0 else v)
        out.append(v)
    return np.array(out)


def fd_check(p, w, c, mask, n_coords=24, seed=0, step=1e-5):
    """Max relative error of the analytic gradient at random coordinates of trainable groups."""
    _, g = resnet.loss_and_gradient(p, w, c, mask)
    rng = np.random.default_rng(seed)
    pairs = [(a, ga) for grp, ggrp, on in zip(p.groups(), g.groups(), mask.groups()) if on
             for a, ga in zip(grp, ggrp)]
    worst = 0.0
    for _ in range(n_coords):
        a, ga = pairs[rng.integers(len(pairs))]
        idx = tuple(rng.integers(s) for s in a.shape)
        old = a[idx]
        a[idx] = old + step
        lp = resnet.loss_and_gradient(p, w, c)[0]
        a[idx] = old - step
        lm = resnet.loss_and_gradient(p, w, c)[0]
        a[idx] = old
        fd = (lp - lm) / (2 * step)
        worst = max(worst, abs(fd - ga[idx]) / max(abs(fd), abs(ga[idx]), 1e-7))
    return worst


def all_masks(B):
    yield resnet.TrainableMask.full(B)
    yield resnet.TrainableMask(True, (False,) * B)
    for i in range(1, B + 1):
        yield resnet.TrainableMask.only_block(i, B)


@pytest.mark.parametrize(
    "m,k,W,B,count",
    [(16, 28, 200, 1, 49648), (16, 28, 200, 2, 101248), (16, 28, 200, 3, 152848),
     (16, 28, 200, 6, 307648), (16, 28, 20, 1, 1768), (16, 28, 20, 2, 3328),
     (16, 28, 20, 3, 4888), (16, 28, 20, 6, 9568), (16, 21, 20, 1, 1516),
     (16, 21, 20, 2, 2796), (16, 21, 20, 3, 4076), (16, 21, 20, 6, 7916),
     (16, 21, 20, 12, 15596)],
)
def test_parameter_counts(m, k, W, B, count):
    assert resnet.count_params(resnet.init_gaussian(m, k, W, B)) == count


def test_parameter_count_for_49_sensors_follows_formula():
    # W*m + W + W*W + W + k*W + k*m with m=49, k=22, W=20
    assert resnet.count_params(resnet.init_gaussian(49, 22, 20, 1)) == 2938


def test_forward_simple_cases():
    p = resnet.init_gaussian(3, 5, 4, 2, rng=np.random.default_rng(0))
    zero = p.zeros_like()
    assert np.all(resnet.forward(zero, np.ones((2, 3))) == 0)
    eye = p.zeros_like()
    eye.theta0[:3, :3] = np.eye(3)
    assert np.allclose(resnet.forward(eye, [1.0, 0, 0]), [1, 0, 0, 0, 0])
    x = np.random.default_rng(1).normal(size=(7, 3))
    assert np.allclose(resnet.forward(p, x), direct_forward(p, x), atol=1e-12, rtol=0)
    with pytest.raises(ValueError):
        resnet.forward(p, np.ones(4))


def test_init_statistics_and_determinism():
    a = resnet.init_gaussian(16, 28, 200, 1, 0.1, np.random.default_rng(3))
    b = resnet.init_gaussian(16, 28, 200, 1, 0.1, np.random.default_rng(3))
    c = resnet.init_gaussian(16, 28, 200, 1, 0.1, np.random.default_rng(4))
    flat = np.concatenate([x.ravel() for x in a.arrays()])
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    assert not np.array_equal(a.theta0, c.theta0)
    assert abs(flat.std() / 0.1 - 1) < 0.05
    with pytest.raises(ValueError):
        resnet.init_gaussian(2, 2, 2, std=0.0)


def test_append_block():
    rng = np.random.default_rng(0)
    p = resnet.init_gaussian(16, 28, 20, 1, rng=rng)
    x = rng.normal(size=(5, 16))
    q = resnet.append_block(p, "zero_last", rng=rng)
    assert q.n_blocks == 2 and p.n_blocks == 1
    assert np.array_equal(resnet.forward(q, x), resnet.forward(p, x))
    assert resnet.count_params(q) - resnet.count_params(p) == 1560
    g = resnet.append_block(p, "gaussian", rng=rng)
    assert not np.allclose(resnet.forward(g, x), resnet.forward(p, x))
    with pytest.raises(ValueError):
        resnet.append_block(p, "ones")


@pytest.mark.parametrize("B", [1, 2, 3])
def test_gradient_matches_finite_differences_for_every_mask(B):
    rng = np.random.default_rng(B)
    p = resnet.init_gaussian(5, 4, 6, B, 0.5, rng)
    w = rng.normal(size=(8, 5))
    c = rng.normal(size=(8, 4))
    for mask in all_masks(B):
        assert fd_check(p, w, c, mask) <= 1e-6, mask


def test_masked_groups_get_zero_and_perfect_fit_gives_zero():
    rng = np.random.default_rng(0)
    p = resnet.init_gaussian(5, 4, 6, 3, 0.5, rng)
    w = rng.normal(size=(8, 5))
    c = rng.normal(size=(8, 4))
    _, g = resnet.loss_and_gradient(p, w, c, resnet.TrainableMask.only_block(2, 3))
    for grp, on in zip(g.groups(), (False, False, True, False)):
        assert on or all(np.all(a == 0) for a in grp)
    loss, g = resnet.loss_and_gradient(p, w, resnet.forward(p, w))
    assert loss == 0 and all(np.all(a == 0) for a in g.arrays())
    with pytest.raises(ValueError):
        resnet.TrainableMask(False, (False, False))


def test_input_gradient_is_finite():
    rng = np.random.default_rng(2)
    p = resnet.init_gaussian(4, 3, 5, 2, 0.5, rng)
    x = rng.normal(size=4)
    J = np.array([(resnet.forward(p, x + 1e-6 * e) - resnet.forward(p, x - 1e-6 * e)) / 2e-6
                  for e in np.eye(4)])
    assert np.all(np.isfinite(J))


def test_serialization_round_trip(tmp_path):
    p = resnet.init_gaussian(16, 21, 20, 3, rng=np.random.default_rng(0))
    data = resnet.serialize(p)
    q = resnet.deserialize(data)
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))
    resnet.save(tmp_path / "m.bin", p)
    x = np.random.default_rng(1).normal(size=(3, 16))
    assert np.array_equal(resnet.forward(resnet.load(tmp_path / "m.bin"), x), resnet.forward(p, x))
    with pytest.raises(FormatError):
        resnet.deserialize(data[:-1])
    with pytest.raises(FormatError):
        resnet.deserialize(b"PDENX" + data[5:])
    with pytest.raises(FormatError):
        resnet.deserialize(data[:10])
