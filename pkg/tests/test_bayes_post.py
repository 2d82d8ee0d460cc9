import numpy as np
import pytest
from conftest import hand_ensemble, hand_net, raw_for_variance
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesian_deep_ensembles.bayes_post import (
    GammaSet,
    compute_gamma,
    compute_gammas,
    elbo_coeffs,
    elbo_value,
    grid_search_gamma,
    mean_head_jacobian,
    predictive_moments_classical,
    predictive_moments_extended,
    regression_moments_classical,
    regression_moments_extended,
    sample_predictive,
    sample_regression,
    separation_ratio,
)
from bayesian_deep_ensembles.datasets import Dataset
from bayesian_deep_ensembles.ensemble import Ensemble
from bayesian_deep_ensembles.errors import DomainError, ShapeError
from bayesian_deep_ensembles.hetero_model import TrainConfig, init_hetero_net, predict

ONE = Dataset([[1.0]], [[0.0]])


def _two_feature_net():
    # h(1) = (1, 1), sigma^2 = 1
    return hand_net([1.0, 1.0], [0.0, 0.0], [[0.0, 0.0]])


def test_c_coefficient():
    _, _, c = elbo_coeffs(_two_feature_net(), ONE, 0.1, 1)
    assert c == 1.0


def test_b_coefficient_hand_value():
    _, b, _ = elbo_coeffs(_two_feature_net(), ONE, 0.0, 1)
    assert b == pytest.approx(-1.0, rel=1e-12)


def test_a_is_minus_inf_without_prior():
    a, _, _ = elbo_coeffs(_two_feature_net(), ONE, 0.0, 1)
    assert a == -np.inf


def test_gamma_with_vanishing_features_is_inverse_lambda():
    net = hand_net([0.0], [0.0], [[1.0]])
    assert compute_gamma(net, ONE, 0.01) == pytest.approx(100.0, rel=1e-12)


def test_gamma_hand_value():
    assert compute_gamma(_two_feature_net(), ONE, 0.5) == pytest.approx(2 / 3, rel=1e-12)


def test_gamma_degenerate_input():
    net = hand_net([0.0], [0.0], [[1.0]])
    with pytest.raises(DomainError):
        compute_gamma(net, ONE, 0.0)


def test_duplicating_data_shrinks_gamma():
    net = init_hetero_net(1, 1, (8, 4), seed=0)
    x = np.linspace(-1, 1, 20)[:, None]
    d1 = Dataset(x, np.sin(3 * x))
    d2 = Dataset(np.vstack([x, x]), np.vstack([np.sin(3 * x)] * 2))
    assert compute_gamma(net, d2, 0.1) < compute_gamma(net, d1, 0.1)


def test_elbo_value_hand_values():
    assert elbo_value([[0.0, -1.0, 0.0]], [1.0]) == -1.0
    assert elbo_value([[-1.0, 0.0, 1.0], [-3.0, 2.0, 0.0]], [1.0, 1.0]) == -1.0
    with pytest.raises(DomainError):
        elbo_value([[0.0, -1.0, 1.0]], [0.0])
    with pytest.raises(ShapeError):
        elbo_value([[0.0, -1.0, 1.0]], [1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(b=st.floats(-1e4, -1e-3), c=st.floats(0.5, 50.0))
def test_closed_form_beats_grid(b, c):
    g_star = -c / b
    g_grid = grid_search_gamma(b, c, g_star / 100, g_star * 100, 200)
    f = lambda g: b * g + c * np.log(g)  # noqa: E731
    assert f(g_star) >= f(g_grid) - 1e-9 * max(1.0, abs(f(g_star)))
    assert abs(np.log(g_grid / g_star)) <= np.log(100) / 199 + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(1e-4, 10.0))
def test_gamma_bounded_by_prior_variance(seed, lam):
    net = init_hetero_net(2, 1, (6, 3), seed=seed)
    x = np.random.default_rng(seed).normal(size=(15, 2))
    g = compute_gamma(net, Dataset(x, np.zeros((15, 1))), lam)
    assert 0 < g <= 1 / lam * (1 + 1e-12)


def test_gamma_set_round_trip(tmp_path, tiny_ensemble):
    x = np.linspace(-1, 1, 9)[:, None]
    gs = compute_gammas(tiny_ensemble, Dataset(x, x**2), lam=0.05)
    gs.save(tmp_path / "g.json")
    back = GammaSet.load(tmp_path / "g.json")
    assert np.array_equal(back.gammas, gs.gammas) and np.array_equal(back.coeffs, gs.coeffs)
    assert elbo_value(gs.coeffs, gs.gammas) >= elbo_value(gs.coeffs, gs.gammas * 1.1)


def _const_net(eta, var=1.0, h=1.0):
    # constant features h, constant mean eta, constant variance var
    return hand_net([0.0], [h], [[eta / h]], v0=raw_for_variance(var))


def test_classical_moments_hand_values():
    ens = hand_ensemble([_const_net(0.0), _const_net(2.0)])
    reg = regression_moments_classical(ens, [0.3])
    pred = predictive_moments_classical(ens, [0.3])
    assert reg.mean[0] == pytest.approx(1.0) and pred.mean[0] == pytest.approx(1.0)
    assert reg.cov[0, 0] == pytest.approx(1.0, rel=1e-12)
    assert pred.cov[0, 0] == pytest.approx(2.0, rel=1e-9)


def test_single_member_classical_has_no_spread():
    ens = hand_ensemble([_const_net(0.7)])
    assert regression_moments_classical(ens, np.zeros((4, 1))).cov.max() == 0.0


def test_extended_weight_term_hand_value():
    # ||h||^2 = 4, gamma = 0.5 -> 2
    ens = hand_ensemble([_const_net(1.0, h=2.0)])
    m = regression_moments_extended(ens, [0.5], [0.0])
    assert m.cov[0, 0] == pytest.approx(2.0, rel=1e-12)


def test_zero_gamma_reduces_to_classical(tiny_ensemble):
    x = np.linspace(-2, 2, 17)[:, None]
    z = np.zeros(3)
    for ext, cls in ((regression_moments_extended, regression_moments_classical),
                     (predictive_moments_extended, predictive_moments_classical)):
        a, b = ext(tiny_ensemble, z, x), cls(tiny_ensemble, x)
        assert np.max(np.abs(a.mean - b.mean)) <= 1e-12
        assert np.max(np.abs(a.cov - b.cov)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), py=st.integers(1, 3), size=st.integers(1, 4))
def test_covariances_are_psd_and_means_agree(seed, py, size):
    nets = [init_hetero_net(2, py, (5, 3), seed=seed + i) for i in range(size)]
    ens = Ensemble(tuple(nets), TrainConfig(), tuple(range(size)))
    g = np.random.default_rng(seed).uniform(0, 2, size)
    x = np.random.default_rng(seed + 1).normal(size=(6, 2))
    moms = [regression_moments_classical(ens, x), predictive_moments_classical(ens, x),
            regression_moments_extended(ens, g, x), predictive_moments_extended(ens, g, x)]
    for m in moms:
        assert np.min(np.linalg.eigvalsh(m.cov)) >= -1e-12
        assert np.array_equal(m.mean, moms[0].mean)
    assert np.all(moms[2].variances() >= moms[0].variances() - 1e-15)


def test_jacobian_matches_unit_weight_evaluations():
    net = init_hetero_net(2, 3, (5, 4), seed=3)
    x = np.array([0.4, -0.9])
    J = mean_head_jacobian(net, x)
    assert J.shape == (3, 12)
    for k in range(12):
        e = np.zeros(12)
        e[k] = 1.0
        col, _ = predict(net.with_mean_weight(e.reshape(3, 4)), x)
        assert np.max(np.abs(J[:, k] - col)) <= 1e-12
    h = J[0, :4]
    np.testing.assert_allclose(J @ J.T, (h @ h) * np.eye(3), rtol=1e-13)


GAMMAS = np.array([0.3, 0.1, 0.5])


@pytest.mark.parametrize("kind", ["regression", "predictive"])
def test_sampler_moments(tiny_ensemble, kind):
    x = np.array([0.4])
    rng = np.random.default_rng(0)
    if kind == "regression":
        draws = sample_regression(tiny_ensemble, GAMMAS, x, rng, size=200_000)
        target = regression_moments_extended(tiny_ensemble, GAMMAS, x)
    else:
        draws = sample_predictive(tiny_ensemble, GAMMAS, x, rng, size=200_000)
        target = predictive_moments_extended(tiny_ensemble, GAMMAS, x)
    sd = np.sqrt(target.cov[0, 0])
    assert abs(draws.mean() - target.mean[0]) <= 0.02 * sd
    assert draws.var() == pytest.approx(target.cov[0, 0], rel=0.02)


def test_sampler_member_frequencies(tiny_ensemble):
    _, picks = sample_regression(tiny_ensemble, GAMMAS, [0.1], np.random.default_rng(1),
                                 size=60_000, return_members=True)
    freq = np.bincount(picks, minlength=3) / picks.size
    assert np.all(np.abs(freq - 1 / 3) < 0.01)


def test_sampler_single_draw_and_determinism(tiny_ensemble):
    a = sample_predictive(tiny_ensemble, GAMMAS, [0.0], np.random.default_rng(5))
    b = sample_predictive(tiny_ensemble, GAMMAS, [0.0], np.random.default_rng(5))
    assert a.shape == (1,) and np.array_equal(a, b)
    with pytest.raises(ShapeError):
        sample_regression(tiny_ensemble, GAMMAS, np.zeros((2, 1)), np.random.default_rng(0))
    with pytest.raises(ShapeError):
        sample_regression(tiny_ensemble, GAMMAS[:2], [0.0], np.random.default_rng(0))


def test_separation_ratio_hand_value():
    ens = hand_ensemble([_const_net(0.0), _const_net(2.0)])
    # ||W_1 - W_2||^2 = 4, p_w = 1, gamma_1 + gamma_2 = 2
    assert separation_ratio(ens, [1.0, 1.0]) == pytest.approx(2.0)
    assert separation_ratio(hand_ensemble([_const_net(1.0)]), [0.5]) == np.inf
