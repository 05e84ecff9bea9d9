import numpy as np
import pytest

from dnnstate import resnet, training
from dnnstate.errors import TrainingDivergedError


def smoke_data(n=500, m=16, k=6, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(n, m))
    A = rng.normal(size=(k, m)) / np.sqrt(m)
    return w, np.tanh(w @ A.T) + 0.1 * (w[:, :k] ** 2)


def test_batch_loss():
    p = resnet.init_gaussian(3, 2, 4, 1, rng=np.random.default_rng(0))
    w = np.random.default_rng(1).normal(size=(5, 3))
    assert training.batch_loss(p, w, resnet.forward(p, w)) == 0.0
    zero = p.zeros_like()
    c = np.array([3.0, 4.0])
    assert training.batch_loss(zero, w[:1], c[None]) == pytest.approx(25.0)
    # independent evaluator: explicit loop over samples
    c = np.random.default_rng(2).normal(size=(5, 2))
    ref = np.mean([np.sum((resnet.forward(p, wi) - ci) ** 2) for wi, ci in zip(w, c)])
    assert abs(training.batch_loss(p, w, c) - ref) <= 1e-12


def test_proximal_adagrad_hand_values():
    acc, p = np.array([0.1]), np.array([1.0])
    training.proximal_adagrad_step(acc, p, np.array([2.0]), 0.1, 0.0)
    assert acc[0] == pytest.approx(4.1)
    assert p[0] == pytest.approx(1 - 0.2 / np.sqrt(4.1), abs=1e-15)
    assert p[0] == pytest.approx(0.901229, abs=3e-6)
    acc, p = np.array([0.1]), np.array([0.01])
    training.proximal_adagrad_step(acc, p, np.array([0.0]), 0.1, 1.0)
    assert p[0] == 0.0
    acc, p = np.array([0.1]), np.array([0.7])
    training.proximal_adagrad_step(acc, p, np.array([0.0]), 0.1, 0.0)
    assert p[0] == 0.7


def test_proximal_adagrad_without_l1_is_adagrad():
    rng = np.random.default_rng(0)
    p1 = rng.normal(size=10)
    p2 = p1.copy()
    a1, a2 = np.full(10, 0.1), np.full(10, 0.1)
    for _ in range(5):
        g = rng.normal(size=10)
        training.proximal_adagrad_step(a1, p1, g, 0.05, 0.0)
        a2 += g * g
        p2 -= 0.05 * g / np.sqrt(a2)
    assert np.allclose(p1, p2, rtol=0, atol=1e-15)


def test_adam_first_step():
    for g in (0.3, -5.0, 1e3):
        st = {"m": np.zeros(1), "v": np.zeros(1), "t": 0}
        p = np.array([1.0])
        training.adam_step(st, p, np.array([g]), 0.001)
        assert abs(1.0 - p[0]) == pytest.approx(0.001, rel=1e-4)
    st = {"m": np.zeros(1), "v": np.zeros(1), "t": 0}
    p = np.array([1.0])
    training.adam_step(st, p, np.zeros(1), 0.001)
    assert p[0] == 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        training.TrainConfig(lr=0)
    with pytest.raises(ValueError):
        training.TrainConfig(batch=0)
    with pytest.raises(ValueError):
        training.TrainConfig(optimizer="sgd")
    with pytest.raises(ValueError):
        training.TrainConfig(schedule="cyclic")


def test_stage_steps():
    assert training.stage_steps(600, 3) == [200, 200, 200]
    assert training.stage_steps(10, 3) == [3, 3, 4]


def test_global_training_smoke():
    w, c = smoke_data()
    cfg = training.TrainConfig(lr=0.03, width=20, blocks=1, steps=10_000, schedule="global", seed=1)
    p, h = training.train(w, c, cfg)
    assert len(h) == 100
    assert h.loss[-1] < 0.5 * h.loss[0]
    p2, h2 = training.train(w, c, cfg)
    assert h.loss == h2.loss
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), p2.arrays()))


def test_zero_steps_leave_params_unchanged():
    w, c = smoke_data(50)
    p0 = resnet.init_gaussian(16, 6, 5, 1, rng=np.random.default_rng(0))
    cfg = training.TrainConfig(steps=0)
    p, h = training.train_global(p0, w, c, cfg)
    assert len(h) == 0 and all(np.array_equal(a, b) for a, b in zip(p.arrays(), p0.arrays()))


def test_expansion_with_one_block_equals_global():
    w, c = smoke_data(200)
    kw = dict(lr=0.03, width=8, blocks=1, steps=500, seed=4)
    pe, he = training.train(w, c, training.TrainConfig(schedule="expansion", **kw))
    pg, hg = training.train(w, c, training.TrainConfig(schedule="global", **kw))
    assert he.loss == hg.loss
    assert all(np.array_equal(a, b) for a, b in zip(pe.arrays(), pg.arrays()))


def test_expansion_freezes_earlier_blocks():
    w, c = smoke_data(200)
    cfg = training.TrainConfig(lr=0.03, width=8, blocks=3, steps=600, seed=2)
    p2, _ = training.train(w, c, training.TrainConfig(**{**cfg.__dict__, "blocks": 2, "steps": 400}))
    p3, h3 = training.train(w, c, cfg)
    assert np.array_equal(p2.theta0, p3.theta0)
    for a, b in zip(p2.blocks[0].arrays() + p2.blocks[1].arrays(),
                    p3.blocks[0].arrays() + p3.blocks[1].arrays()):
        assert np.array_equal(a, b)
    assert h3.block == [1, 1, 2, 2, 3, 3]
    assert h3.boundaries == [200, 400]


def test_residual_dataset_equivalence_exact():
    rng = np.random.default_rng(0)
    for trial in range(20):
        B = 1 + trial % 4
        p = resnet.init_gaussian(6, 5, 7, B + 1, 0.3, rng)
        w = rng.normal(size=(9, 6))
        c = rng.normal(size=(9, 5))
        full_loss, g = resnet.loss_and_gradient(p, w, c, resnet.TrainableMask.only_block(B + 1, B + 1))
        x, target = training.residual_dataset(p.prefix(B), w, c)
        br_loss, gb = resnet.branch_loss_and_gradient(p.blocks[B], x, target)
        assert abs(full_loss - br_loss) <= 1e-12
        for a, b in zip(g.blocks[B].arrays(), gb.arrays()):
            assert np.abs(a - b).max() <= 1e-12
    p0 = resnet.init_gaussian(6, 5, 7, 1, rng=rng).zeros_like()
    x, target = training.residual_dataset(p0, w, c)
    assert np.all(x == 0) and np.array_equal(target, c)


def test_plus_global():
    w, c = smoke_data(200)
    cfg = training.TrainConfig(lr=0.03, width=8, blocks=2, steps=400, extra_steps=200,
                               schedule="expansion_plus_global", seed=1)
    p, h = training.train(w, c, cfg)
    assert h.step[-1] == 600 and len(h) == 6 and h.block[-1] == 0
    pe, he = training.train(w, c, training.TrainConfig(**{**cfg.__dict__, "extra_steps": 0}))
    assert he.step[-1] == 400
    q, hq = training.train_schedule_plus_global(pe, w, c, cfg, 0, he)
    assert q is pe and len(hq) == 4


def test_adam_schedule_runs():
    w, c = smoke_data(200)
    cfg = training.TrainConfig(lr=0.002, optimizer="adam", width=8, blocks=2, steps=1000)
    _, h = training.train(w, c, cfg)
    assert h.loss[-1] < h.loss[0]


def test_divergence_raises():
    w, c = smoke_data(100)
    c = c * 1e200
    cfg = training.TrainConfig(lr=0.1, width=4, blocks=1, steps=50)
    with pytest.raises(TrainingDivergedError) as info:
        training.train(w, c, cfg)
    assert info.value.step == 0


def test_stagnation_flag_stops_early():
    w, c = smoke_data(100)
    cfg = training.TrainConfig(lr=0.03, width=4, blocks=1, steps=20_000, stagnation_tol=0.5,
                               stagnation_window=1000)
    _, h = training.train(w, c, cfg)
    assert h.step[-1] < 20_000


def test_history_csv_round_trip(tmp_path):
    w, c = smoke_data(100)
    _, h = training.train(w, c, training.TrainConfig(steps=300, width=4, blocks=2))
    h.to_csv(tmp_path / "l.csv")
    text = (tmp_path / "l.csv").read_text()
    assert text.splitlines()[0] == "step,loss,block_index,wall_ms"
    back = training.LossHistory.from_csv(tmp_path / "l.csv")
    assert back.loss == h.loss and back.block == h.block
    _, ht = training.train(w, c, training.TrainConfig(steps=300, width=4, blocks=2, timing=True))
    assert all(t is not None and t >= 0 for t in ht.wall_ms)
