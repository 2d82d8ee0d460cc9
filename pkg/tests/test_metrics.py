import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesian_deep_ensembles.datasets import Dataset
from bayesian_deep_ensembles.errors import DomainError, ShapeError
from bayesian_deep_ensembles.metrics import (
    EvalReport,
    coverage,
    evaluate,
    interval_halfwidth_factor,
    rmse,
    variance_ratio,
)


def test_rmse_hand_value():
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5 / np.sqrt(2), rel=1e-15)


def test_rmse_errors():
    with pytest.raises(ShapeError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(DomainError):
        rmse(np.zeros(0), np.zeros(0))


def test_halfwidth_factor():
    assert interval_halfwidth_factor(0.95) == 1.96
    assert interval_halfwidth_factor(0.6827) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(DomainError):
        interval_halfwidth_factor(1.0)


def test_coverage_hand_values():
    assert coverage([0.0], [1.0], [1.9]) == 1.0
    assert coverage([0.0, 0.0], [1.0, 1.0], [0.0, 3.0]) == 0.5
    # boundary counts as inside
    assert coverage([0.0], [1.0], [1.96]) == 1.0


def test_coverage_errors():
    with pytest.raises(ShapeError):
        coverage([0.0, 1.0], [1.0], [0.0, 1.0])
    with pytest.raises(DomainError):
        coverage([0.0], [-1.0], [0.0])


def test_variance_ratio_modes():
    assert variance_ratio([1.0, 1.0], [2.0, 2.0]) == 0.5
    assert variance_ratio([1.0, 3.0], [1.0, 3.0], "pointwise") == 1.0
    assert variance_ratio([1.0, 0.0], [1.0, 3.0], "means") == 0.25
    assert variance_ratio([1.0, 0.0], [1.0, 3.0], "pointwise") == 0.5
    with pytest.raises(DomainError):
        variance_ratio([1.0], [0.0])
    with pytest.raises(DomainError):
        variance_ratio([1.0], [1.0], "median")


def test_report_validation():
    with pytest.raises(DomainError):
        EvalReport("d", "classical", 1, 0.1, 1.2, 0.5, 0.1)
    with pytest.raises(DomainError):
        EvalReport("d", "bayes", 1, 0.1, 0.2, 0.5, 0.1)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    scale=st.floats(1.0, 10.0),
)
def test_coverage_monotone_in_variance(seed, scale):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=30)
    v = rng.uniform(0.01, 2.0, size=30)
    t = rng.normal(size=30) * 2
    assert coverage(m, v * scale, t) >= coverage(m, v, t)


def test_extended_coverage_dominates_classical(tiny_ensemble):
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, size=(200, 1))
    y = np.sin(2 * x) + 0.5 * rng.normal(size=x.shape)
    test = Dataset(x, y, np.sin(2 * x), "toy")
    cls, ext = evaluate(tiny_ensemble, np.array([0.3, 0.1, 0.5]), test)
    assert (cls.variant, ext.variant) == ("classical", "extended")
    assert cls.rmse == ext.rmse and cls.size == 3
    assert ext.epistemic_coverage >= cls.epistemic_coverage
    assert ext.total_coverage >= cls.total_coverage
    assert ext.truth_epistemic_coverage >= cls.truth_epistemic_coverage
    assert ext.variance_ratio > cls.variance_ratio
