import numpy as np
import pytest
from conftest import UNIT_RAW, hand_net

from bayesian_deep_ensembles.datasets import Dataset, gen_quartic_1d, normalize
from bayesian_deep_ensembles.errors import ConfigError, ShapeError, TrainingError
from bayesian_deep_ensembles.hetero_model import (
    TrainConfig,
    TrainHistory,
    init_hetero_net,
    loss_and_grads,
    nll_loss,
    predict,
    train_map,
)


def test_zero_mean_head_gives_zero_mean():
    net = init_hetero_net(3, 2, (8, 4), seed=1)
    net = net.with_mean_weight(np.zeros((2, 4)))
    mean, var = predict(net, np.random.default_rng(0).normal(size=(5, 3)))
    assert np.all(mean == 0)
    assert np.all(var >= net.variance_floor)


def test_variance_floor_clamp():
    net = hand_net([1.0], [0.0], [[1.0]], v0=-1e6)
    _, var = predict(net, [0.3])
    assert var == net.variance_floor == 1e-6


def test_hand_dot_product_mean():
    # h(1) = (1, 2); W = (0.5, -1)
    net = hand_net([1.0, 2.0], [0.0, 0.0], [[0.5, -1.0]])
    mean, _ = predict(net, [1.0])
    assert mean[0] == pytest.approx(-1.5, abs=1e-15)


def test_predict_shape_error():
    with pytest.raises(ShapeError):
        predict(init_hetero_net(2, 1, (4,)), np.ones((3, 5)))


def test_loss_zero_residual_unit_variance():
    net = hand_net([1.0], [0.0], [[3.0]])
    assert nll_loss(net, [[1.0]], [[3.0]], 0.0, 1) == pytest.approx(0.0, abs=1e-12)


def test_loss_residual_two():
    net = hand_net([1.0], [0.0], [[3.0]])
    assert nll_loss(net, [[1.0]], [[5.0]], 0.0, 1) == pytest.approx(2.0, abs=1e-12)


def test_loss_regularizer_hand_value():
    # weights chosen so ||theta||^2 = 1 + (2 - UNIT_RAW^2) + UNIT_RAW^2 = 3
    c = np.sqrt(2.0 - UNIT_RAW**2)
    net = hand_net([1.0], [0.0], [[c]])
    assert net.sq_norm() == pytest.approx(3.0, rel=1e-15)
    assert nll_loss(net, [[1.0]], [[c]], 2.0, 1) == pytest.approx(3.0, rel=1e-12)


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    net = init_hetero_net(2, 2, (6, 5), seed=4)
    x = rng.normal(size=(7, 2))
    y = rng.normal(size=(7, 2))
    lam, n_total = 0.3, 20
    _, grads = loss_and_grads(net, x, y, lam, n_total)
    flat_g = np.concatenate([g.flat() for g in grads])
    parts = net.parts()
    sizes = [p.num_params for p in parts]
    theta = np.concatenate([p.flat() for p in parts])

    def loss_at(vec):
        out, i = [], 0
        for p, k in zip(parts, sizes):
            out.append(p.from_flat(vec[i : i + k]))
            i += k
        return nll_loss(net.with_parts(out), x, y, lam, n_total)

    h = 1e-5
    for _ in range(5):
        d = rng.normal(size=theta.shape)
        d /= np.linalg.norm(d)
        fd = (loss_at(theta + h * d) - loss_at(theta - h * d)) / (2 * h)
        an = flat_g @ d
        assert abs(fd - an) <= 1e-4 * max(abs(fd), abs(an))


def test_epoch_sum_equals_full_loss():
    rng = np.random.default_rng(9)
    net = init_hetero_net(3, 1, (8, 4), seed=9)
    x = rng.normal(size=(23, 3))
    y = rng.normal(size=(23, 1))
    full = nll_loss(net, x, y, 0.7, 23)
    parts = sum(nll_loss(net, x[i : i + 5], y[i : i + 5], 0.7, 23) for i in range(0, 23, 5))
    assert parts == pytest.approx(full, rel=1e-10)


def test_schedules():
    step = TrainConfig(epochs=10, lr=1.0, schedule="step")
    assert [step.lr_at(e) for e in (4, 5, 9)] == [1.0, pytest.approx(0.1), pytest.approx(0.1)]
    geo = TrainConfig(epochs=10, lr=1.0, schedule="geometric")
    assert [geo.lr_at(e) for e in (4, 5, 6, 9)] == [1.0, 0.5, 0.25, 0.5**5]
    assert TrainConfig(schedule="constant", epochs=10, lr=2.0).lr_at(9) == 2.0


@pytest.mark.parametrize("kw", [{"epochs": 0}, {"lr": 0.0}, {"lam": -1.0}, {"schedule": "cosine"}])
def test_train_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_fit_a_constant():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(64, 1))
    c = 1.5
    data = Dataset(x, np.full((64, 1), c))
    net = train_map(data, TrainConfig(epochs=150, batch_size=16, lr=1e-2, lam=0.0, hidden=(16, 8), seed=2))
    mean, _ = predict(net, x)
    assert np.all(np.abs(mean - c) <= abs(c) * 0.05 + 0.05)


def test_huge_lambda_shrinks_weights():
    data = gen_quartic_1d(64, 1)
    cfg = TrainConfig(epochs=5, batch_size=16, lr=1e-2, lam=1e6, hidden=(16, 8), seed=0)
    init = init_hetero_net(1, 1, cfg.hidden, cfg.seed)
    net = train_map(data, cfg)
    assert net.sq_norm() < init.sq_norm()


def test_training_is_deterministic():
    data, _, _ = normalize(gen_quartic_1d(50, 3))
    cfg = TrainConfig(epochs=3, batch_size=16, lr=5e-3, lam=0.02, hidden=(8, 4), seed=5)
    a, b = train_map(data, cfg), train_map(data, cfg)
    for pa, pb in zip(a.parts(), b.parts()):
        assert all(np.array_equal(u, v) for u, v in zip(pa.arrays(), pb.arrays()))


def test_divergence_names_epoch_and_batch():
    x = np.linspace(-1, 1, 8)[:, None]
    data = Dataset(x, np.full((8, 1), 1e200))
    with pytest.raises(TrainingError, match=r"epoch 0, batch 0"):
        train_map(data, TrainConfig(epochs=2, batch_size=4, hidden=(4,)))


def test_batch_larger_than_data_rejected():
    data = gen_quartic_1d(10, 0)
    with pytest.raises(ConfigError):
        train_map(data, TrainConfig(batch_size=64))


def test_loss_decreases_on_quartic_task():
    train, _, _ = normalize(gen_quartic_1d(200, 0))
    hist = TrainHistory()
    train_map(train, TrainConfig(epochs=60, batch_size=64, lr=1 / 200, lam=1 / 200, seed=1), hist)
    losses = hist.epoch_losses
    assert len(losses) == 60 and np.all(np.isfinite(losses))
    assert np.median(losses[-5:]) <= np.median(losses[:5])
