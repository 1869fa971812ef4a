import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transmission1d.coefficients import CoefficientField
from transmission1d.domain import DecomposedInterval
from transmission1d.parametric import (GaussianVector, LogNormalModel, gamma_lower_bound, sample, sample_stream,
                                       validate_hypotheses)

HALF = DecomposedInterval(0.0, 1.0, (0.5,))


def identity_model(sigma=1.0, seed=0, **kw):
    return LogNormalModel([CoefficientField.identity(HALF)], GaussianVector([[sigma]], seed), **kw)


def split_model(seed=0, gamma_floor=1.0):
    A1 = CoefficientField.from_entries(HALF, a00=[[1.0], [0.0]], a11=[[1.0], [0.0]])
    A2 = CoefficientField.from_entries(HALF, a00=[[0.0], [1.0]], a11=[[0.0], [1.0]])
    return LogNormalModel([A1, A2], GaussianVector(np.eye(2), seed), gamma_floor, "strong")


def test_forced_parameters():
    m = identity_model()
    s = sample(m, 0, X=[0.0])
    assert s.gamma == 1.0
    np.testing.assert_array_equal(s.A.evaluate(0.2), np.eye(2))
    assert sample(m, 0, X=[0.7]).gamma == pytest.approx(np.exp(0.7), rel=1e-14)


def test_hypotheses_examples():
    assert validate_hypotheses(identity_model()).ok
    coupled = LogNormalModel([CoefficientField.from_entries(HALF, a00=1, a11=1, a01=1)], GaussianVector([[1.0]]),
                             1.0, "strong")
    rep = validate_hypotheses(coupled)
    assert [c[0] for c in rep.failures] == ["decoupled: a01 = a10 = 0"]
    half_only = LogNormalModel([CoefficientField.from_entries(HALF, a00=[[1.0], [0.0]], a11=[[1.0], [0.0]])],
                               GaussianVector([[1.0]]), 1.0, "strong")
    rep = validate_hypotheses(half_only)
    assert rep.failures[0][0] == "coverage: gamma_floor > 0 reached" and "U_2" in rep.failures[0][2]
    assert not validate_hypotheses(identity_model(gamma_floor=0.0)).ok
    neg = LogNormalModel([CoefficientField.identity(HALF, -1.0)], GaussianVector([[1.0]]))
    assert "nonnegative: Re A_l >= 0" in [c[0] for c in validate_hypotheses(neg).failures]


def test_covariance_validation():
    with pytest.raises(ValueError):
        GaussianVector([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        GaussianVector([[1.0, 2.0], [2.0, 1.0]])


def test_streams_are_independent_of_order():
    g = GaussianVector([[2.0, 0.5], [0.5, 1.0]], seed=11)
    block = g.draw_many(0, 50)
    np.testing.assert_array_equal(block[37], g.draw(37))
    np.testing.assert_array_equal(g.draw_many(30, 40), block[30:40])


def test_gaussian_moments():
    sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
    X = GaussianVector(sigma, seed=5).draw_many(0, 40000)
    np.testing.assert_allclose(np.cov(X.T), sigma, atol=0.06)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40))
def test_stream_reproducible(seed, index):
    a = sample_stream(seed, index).standard_normal(3)
    b = sample_stream(seed, index).standard_normal(3)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_gamma_lower_bound(x1, x2):
    m = split_model()
    s = sample(m, 0, X=[x1, x2])
    assert s.gamma >= gamma_lower_bound(m, s.X) * (1 - 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3))
def test_gamma_homogeneous(x):
    assert sample(identity_model(), 0, X=[x]).gamma == pytest.approx(np.exp(x), rel=1e-12)
